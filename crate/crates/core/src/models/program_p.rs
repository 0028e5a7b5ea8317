//! The toy program with a shared counter `m`, a shared value `s`, and a
//! thread-local `l`:
//!
//! ```text
//! 0: m++
//! 1: if m = 1 then
//! 2:   s++; l++
//! 3:   assert s = l; goto 2
//!    end            (pc 4)
//! ```
//!
//! Only the first thread to increment `m` can enter the loop, so the
//! assertion holds. Thread 0 is the tracked thread of every abstraction.
//!
//! Abstraction values:
//! * `Alpha1`: `(pc0, s = l0)`
//! * `Alpha2`: `(pc0, s = l0, m = 1)`
//! * `Alpha3`: `(pc0, s = l0, m = 1, m = 0)`
//!
//! Enumerators for other threads reason over the inductive invariant of
//! [`invariant`]. The ones for thread 0 keep the coarser reading over all
//! integer values of `m` where the tracked thread alone is concerned.

use std::str::FromStr;

use crate::abstraction::{make_predicate_abstraction, predicate, AbstractState, PredicateAbstraction, Property, RespectScope, ThreadCount};
use crate::model::{ActionId, LocalDomain, Program, ProgramBuilder, ProgramState, ThreadId, ValueDomain};

use super::ModelError;

/// Shared components.
pub const M: usize = 0;
pub const S: usize = 1;
/// Local components.
pub const PC: usize = 0;
pub const L: usize = 1;

pub const INC_M: ActionId = ActionId(0);
pub const BRANCH: ActionId = ActionId(1);
pub const INC_SL: ActionId = ActionId(2);
pub const CHECK: ActionId = ActionId(3);

/// Program point after the `if`.
pub const EXIT_PC: i64 = 4;

pub fn program_p_model(n: usize) -> Result<Program, ModelError> {
    if n == 0 {
        return Err(ModelError::TooFewThreads { model: "program-p", min: 1, got: 0 });
    }
    let mut b = ProgramBuilder::new("program-p", vec![ValueDomain::Unbounded, ValueDomain::Unbounded]);
    let inc_m = b.action("line 0: m++", |g, l| {
        if l[PC] != 0 {
            return Vec::new();
        }
        vec![(vec![g[M] + 1, g[S]], vec![1, l[L]])]
    });
    let branch = b.action("line 1: if m = 1", |g, l| {
        if l[PC] != 1 {
            return Vec::new();
        }
        let next = if g[M] == 1 { 2 } else { EXIT_PC };
        vec![(g.to_vec(), vec![next, l[L]])]
    });
    let inc_sl = b.action("line 2: s++; l++", |g, l| {
        if l[PC] != 2 {
            return Vec::new();
        }
        vec![(vec![g[M], g[S] + 1], vec![3, l[L] + 1])]
    });
    let check = b.action("line 3: assert s = l; goto 2", |g, l| {
        if l[PC] != 3 {
            return Vec::new();
        }
        vec![(g.to_vec(), vec![2, l[L]])]
    });
    debug_assert_eq!([inc_m, branch, inc_sl, check], [INC_M, BRANCH, INC_SL, CHECK]);
    let local = LocalDomain::Values(vec![ValueDomain::Finite { size: 5 }, ValueDomain::Unbounded]);
    for i in 0..n {
        b.thread(format!("T{i}"), "P", vec![inc_m, branch, inc_sl, check], local.clone());
    }
    b.initial(ProgramState::new(vec![0, 0], vec![vec![0, 0]; n]));
    Ok(b.build())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Variant {
    Alpha1,
    Alpha2,
    Alpha3,
}

impl FromStr for Variant {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "1" | "alpha1" | "a1" => Ok(Variant::Alpha1),
            "2" | "alpha2" | "a2" => Ok(Variant::Alpha2),
            "3" | "alpha3" | "a3" => Ok(Variant::Alpha3),
            other => Err(ModelError::UnknownVariant(other.to_string())),
        }
    }
}

impl Variant {
    pub fn name(self) -> &'static str {
        match self {
            Variant::Alpha1 => "alpha1",
            Variant::Alpha2 => "alpha2",
            Variant::Alpha3 => "alpha3",
        }
    }

    fn tracks_m_one(self) -> bool {
        self != Variant::Alpha1
    }

    fn tracks_m_zero(self) -> bool {
        self == Variant::Alpha3
    }

    /// Declared disrespectful (action, thread) pairs.
    pub fn disrespects(self, action: ActionId, thread: ThreadId) -> bool {
        let tracked = thread.0 == 0;
        match (self, action) {
            (_, INC_SL) => !tracked,
            (Variant::Alpha1, BRANCH) => tracked,
            (Variant::Alpha2, INC_M) => true,
            (Variant::Alpha3, INC_M) => !tracked,
            _ => false,
        }
    }
}

/// Decoded abstract value.
#[derive(Clone, Copy, Debug)]
struct View {
    pc0: i64,
    eq: bool,
    m_one: Option<bool>,
    m_zero: Option<bool>,
}

impl View {
    fn decode(v: Variant, a: &AbstractState) -> Self {
        let x = &a.0;
        Self {
            pc0: x[0],
            eq: x[1] == 1,
            m_one: v.tracks_m_one().then(|| x[2] == 1),
            m_zero: v.tracks_m_zero().then(|| x[3] == 1),
        }
    }

    fn encode(v: Variant, pc0: i64, eq: bool, m: i64) -> AbstractState {
        let mut out = vec![pc0, eq as i64];
        if v.tracks_m_one() {
            out.push((m == 1) as i64);
        }
        if v.tracks_m_zero() {
            out.push((m == 0) as i64);
        }
        AbstractState(out)
    }

    /// Values of `m` consistent with this view and the invariant.
    fn m_candidates(self, threads: ThreadCount) -> Vec<i64> {
        let cap = match threads {
            ThreadCount::Fixed(n) => n as i64,
            // Values from 2 upward behave alike once no upper limit applies.
            ThreadCount::Parametric => 3,
        };
        let counted = (self.pc0 >= 1) as i64;
        (0..=cap)
            .filter(|&m| m >= counted)
            .filter(|&m| self.pc0 != EXIT_PC || m >= 2)
            .filter(|&m| m != 0 || (self.pc0 == 0 && self.eq))
            .filter(|&m| self.m_one.is_none_or(|b| b == (m == 1)))
            .filter(|&m| self.m_zero.is_none_or(|b| b == (m == 0)))
            .collect()
    }
}

fn fits(threads: ThreadCount, needed: i64) -> bool {
    match threads {
        ThreadCount::Fixed(n) => needed <= n as i64,
        ThreadCount::Parametric => true,
    }
}

fn successors(v: Variant, a: &AbstractState, action: ActionId, thread: ThreadId, threads: ThreadCount) -> Vec<AbstractState> {
    let view = View::decode(v, a);
    let counted = (view.pc0 >= 1) as i64;
    let mut out = Vec::new();
    match (action, thread.0 == 0) {
        (BRANCH, true) if view.pc0 == 1 => {
            out.push(AbstractState(vec![2, view.eq as i64]));
            out.push(AbstractState(vec![EXIT_PC, view.eq as i64]));
        }
        (INC_M, true) if view.pc0 == 0 => {
            // Any integer m: the new value is 1 exactly when m was 0.
            out.push(View::encode(v, 1, view.eq, 2));
            if view.m_one != Some(true) {
                out.push(View::encode(v, 1, view.eq, 1));
            }
        }
        (INC_M, false) => {
            for m in view.m_candidates(threads) {
                // Some other thread is still at line 0.
                let others_past_zero = m - counted;
                if fits(threads, 1 + others_past_zero + 1) {
                    out.push(View::encode(v, view.pc0, view.eq, m + 1));
                }
            }
        }
        (INC_SL, false) if view.eq && !(2..=3).contains(&view.pc0) => {
            for m in view.m_candidates(threads) {
                // The moving thread is in the loop and counted in m.
                let others_past_zero = m - counted;
                if others_past_zero >= 1 && fits(threads, 1 + others_past_zero) {
                    out.push(View::encode(v, view.pc0, false, m));
                }
            }
        }
        _ => {}
    }
    out.sort();
    out.dedup();
    out
}

pub fn program_p_alpha(variant: Variant) -> PredicateAbstraction {
    let mut preds = vec![predicate("s = l0", |s: &ProgramState| s.shared[S] == s.locals[0][L])];
    if variant.tracks_m_one() {
        preds.push(predicate("m = 1", |s: &ProgramState| s.shared[M] == 1));
    }
    if variant.tracks_m_zero() {
        preds.push(predicate("m = 0", |s: &ProgramState| s.shared[M] == 0));
    }
    make_predicate_abstraction(variant.name(), |s| s.locals[0][PC], preds)
        .with_disrespect(move |x, t| variant.disrespects(x, t), move |a, x, t, c| successors(variant, a, x, t, c))
}

/// The assertion of line 3, for the tracked thread.
pub fn assertion() -> Property {
    Property::new("pc0 = 3 implies s = l0", |a| a.0[0] != 3 || a.0[1] == 1)
}

/// Inductive invariant of the program, for any thread count:
/// `m` counts threads past line 0; at most one thread is in the loop
/// (lines 2-3) and then `s` equals its `l`; otherwise `s = 0`; threads
/// outside the loop have `l = 0`; a thread at the exit implies `m >= 2`.
pub fn invariant(s: &ProgramState) -> bool {
    let pcs: Vec<i64> = s.locals.iter().map(|l| l[PC]).collect();
    if s.shared[M] != pcs.iter().filter(|&&p| p >= 1).count() as i64 {
        return false;
    }
    let in_loop: Vec<usize> = (0..pcs.len()).filter(|&i| (2..=3).contains(&pcs[i])).collect();
    if in_loop.len() > 1 {
        return false;
    }
    if s.locals.iter().any(|l| matches!(l[PC], 0 | 1 | EXIT_PC) && l[L] != 0) {
        return false;
    }
    match in_loop.first() {
        Some(&j) => {
            if s.shared[S] != s.locals[j][L] || s.shared[S] < 0 {
                return false;
            }
        }
        None => {
            if s.shared[S] != 0 {
                return false;
            }
        }
    }
    !(pcs.contains(&EXIT_PC) && s.shared[M] < 2)
}

/// States with every integer in `[-bound, bound]` that satisfy [`invariant`].
pub fn invariant_states(n: usize, bound: i64) -> Vec<ProgramState> {
    let mut out = Vec::new();
    let total = 5usize.pow(n as u32);
    for code in 0..total {
        let mut pcs = Vec::with_capacity(n);
        let mut c = code;
        for _ in 0..n {
            pcs.push((c % 5) as i64);
            c /= 5;
        }
        let m = pcs.iter().filter(|&&p| p >= 1).count() as i64;
        if m > bound {
            continue;
        }
        let in_loop: Vec<usize> = (0..n).filter(|&i| (2..=3).contains(&pcs[i])).collect();
        let s_values: Vec<i64> = if in_loop.is_empty() { vec![0] } else { (0..=bound).collect() };
        for sv in s_values {
            let locals = (0..n)
                .map(|i| vec![pcs[i], if in_loop.contains(&i) { sv } else { 0 }])
                .collect();
            let st = ProgramState::new(vec![m, sv], locals);
            if invariant(&st) {
                out.push(st);
            }
        }
    }
    out
}

/// Audit scope: bounded integers intersected with the invariant, all threads.
pub fn audit_scope(n: usize, bound: i64) -> RespectScope {
    RespectScope {
        states: invariant_states(n, bound),
        threads: (0..n).map(ThreadId).collect(),
        exhaustive: false,
    }
}
