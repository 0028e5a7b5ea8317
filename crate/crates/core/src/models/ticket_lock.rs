//! Ticket lock. Shared: the ticket being served `s` and the next free
//! ticket `t`. Each thread holds a ticket `l`, taken at creation, so
//! initially `s = 0`, `t = n`, `l_i = i`.
//!
//! ```text
//! 0: while s != l { }           (wait)
//! 1: inc(s)                     (release, pc becomes 2)
//!    l := fetch_and_add(t); goto 0   (take_ticket, from pc 2)
//! ```
//!
//! Line 1 leaves the critical section in two steps, so a thread that has
//! released but not yet re-queued is observable at pc 2.
//!
//! Abstraction `(pc0, P1, P2, P3, P4)`:
//! * P1: every ticket is below `t`
//! * P2: at least two threads are at line 1 (the mutual exclusion violation)
//! * P3: `s = l0`
//! * P4: no other thread holds `l0`

use crate::abstraction::{make_predicate_abstraction, predicate, AbstractState, PredicateAbstraction, Property, RespectScope, ThreadCount};
use crate::model::{ActionId, LocalDomain, Program, ProgramBuilder, ProgramState, ThreadId, ValueDomain};

use super::ModelError;

pub const S: usize = 0;
pub const T: usize = 1;
pub const PC: usize = 0;
pub const L: usize = 1;

pub const WAIT: ActionId = ActionId(0);
pub const RELEASE: ActionId = ActionId(1);
pub const TAKE_TICKET: ActionId = ActionId(2);

/// Program line of each action.
pub fn line_of(action: ActionId) -> u32 {
    if action == WAIT {
        0
    } else {
        1
    }
}

fn build(n: usize, double_increment: bool) -> Result<Program, ModelError> {
    if n < 2 {
        return Err(ModelError::TooFewThreads { model: "ticket-lock", min: 2, got: n });
    }
    let name = if double_increment { "ticket-lock-double-inc" } else { "ticket-lock" };
    let mut b = ProgramBuilder::new(name, vec![ValueDomain::Unbounded, ValueDomain::Unbounded]);
    let wait = b.action("line 0: while s != l", move |g, l| {
        if l[PC] != 0 {
            return Vec::new();
        }
        if g[S] != l[L] {
            return vec![(g.to_vec(), l.to_vec())];
        }
        // The mutant also bumps s on entry, so s moves twice per turn.
        let s = if double_increment { g[S] + 1 } else { g[S] };
        vec![(vec![s, g[T]], vec![1, l[L]])]
    });
    let release = b.action("line 1: inc(s)", |g, l| {
        if l[PC] != 1 {
            return Vec::new();
        }
        vec![(vec![g[S] + 1, g[T]], vec![2, l[L]])]
    });
    let take = b.action("line 1: l := fetch_and_add(t); goto 0", |g, l| {
        if l[PC] != 2 {
            return Vec::new();
        }
        vec![(vec![g[S], g[T] + 1], vec![0, g[T]])]
    });
    debug_assert_eq!([wait, release, take], [WAIT, RELEASE, TAKE_TICKET]);
    let local = LocalDomain::Values(vec![ValueDomain::Finite { size: 3 }, ValueDomain::Unbounded]);
    for i in 0..n {
        b.thread(format!("T{i}"), "lock", vec![wait, release, take], local.clone());
    }
    let locals = (0..n).map(|i| vec![0, i as i64]).collect();
    b.initial(ProgramState::new(vec![0, n as i64], locals));
    Ok(b.build())
}

pub fn ticket_lock_model(n: usize) -> Result<Program, ModelError> {
    build(n, false)
}

/// Seeded bug: `s` is incremented on entry as well as on release.
pub fn ticket_lock_double_increment(n: usize) -> Result<Program, ModelError> {
    build(n, true)
}

fn successors(a: &AbstractState, action: ActionId, thread: ThreadId, _: ThreadCount) -> Vec<AbstractState> {
    let [pc0, p1, p2, p3, p4] = a.0[..] else {
        return Vec::new();
    };
    match (action, thread.0 == 0) {
        // The new ticket is the old t: above every live and retired ticket,
        // equal to s only if nobody else is queued.
        (TAKE_TICKET, true) if pc0 == 2 => vec![
            AbstractState(vec![0, 1, p2, 0, 1]),
            AbstractState(vec![0, 1, p2, 1, 1]),
        ],
        // The holder releases; thread 0's ticket may be next in line.
        (RELEASE, false) if pc0 == 0 && p3 == 0 => vec![AbstractState(vec![0, p1, p2, 1, p4])],
        _ => Vec::new(),
    }
}

pub fn ticket_lock_alpha() -> PredicateAbstraction {
    let preds = vec![
        predicate("P1: all tickets below t", |s: &ProgramState| {
            s.locals.iter().all(|l| s.shared[T] > l[L])
        }),
        predicate("P2: two threads at line 1", |s: &ProgramState| {
            s.locals.iter().filter(|l| l[PC] == 1).count() >= 2
        }),
        predicate("P3: s = l0", |s: &ProgramState| s.shared[S] == s.locals[0][L]),
        predicate("P4: l0 unique", |s: &ProgramState| {
            s.locals[1..].iter().all(|l| l[L] != s.locals[0][L])
        }),
    ];
    make_predicate_abstraction("ticket-predicates", |s| s.locals[0][PC], preds).with_disrespect(
        |x, t| (x == TAKE_TICKET && t.0 == 0) || (x == RELEASE && t.0 != 0),
        successors,
    )
}

pub fn mutual_exclusion() -> Property {
    Property::new("not P2", |a| a.0[2] == 0)
}

/// Inductive invariant: `s >= 0`; the tickets of threads at lines 0-1 are
/// exactly `s..t`, one each; a thread at line 1 holds `s`; threads at pc 2
/// hold distinct tickets below `s`.
pub fn invariant(st: &ProgramState) -> bool {
    let (s, t) = (st.shared[S], st.shared[T]);
    if s < 0 {
        return false;
    }
    let mut live: Vec<i64> = st.locals.iter().filter(|l| l[PC] <= 1).map(|l| l[L]).collect();
    live.sort();
    if t != s + live.len() as i64 || live != (s..t).collect::<Vec<_>>() {
        return false;
    }
    if st.locals.iter().any(|l| l[PC] == 1 && l[L] != s) {
        return false;
    }
    let mut retired: Vec<i64> = st.locals.iter().filter(|l| l[PC] == 2).map(|l| l[L]).collect();
    retired.sort();
    let len = retired.len();
    retired.dedup();
    retired.len() == len && retired.iter().all(|&x| (0..s).contains(&x))
}

/// Injective sequences of length `k` over `values`.
fn injections(k: usize, values: &[i64]) -> Vec<Vec<i64>> {
    if k == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for (i, &v) in values.iter().enumerate() {
        let rest: Vec<i64> = values.iter().enumerate().filter(|&(j, _)| j != i).map(|(_, &x)| x).collect();
        for mut tail in injections(k - 1, &rest) {
            tail.insert(0, v);
            out.push(tail);
        }
    }
    out
}

/// States with integers in `[-bound, bound]` satisfying [`invariant`].
pub fn invariant_states(n: usize, bound: i64) -> Vec<ProgramState> {
    let mut out = Vec::new();
    for code in 0..3usize.pow(n as u32) {
        let mut pcs = Vec::with_capacity(n);
        let mut c = code;
        for _ in 0..n {
            pcs.push((c % 3) as i64);
            c /= 3;
        }
        let live: Vec<usize> = (0..n).filter(|&i| pcs[i] <= 1).collect();
        let retired: Vec<usize> = (0..n).filter(|&i| pcs[i] == 2).collect();
        for s in 0..=bound {
            let t = s + live.len() as i64;
            if t > bound {
                continue;
            }
            let live_tickets: Vec<i64> = (s..t).collect();
            for lt in injections(live.len(), &live_tickets) {
                let old: Vec<i64> = (0..s).collect();
                for rt in injections(retired.len(), &old) {
                    let mut locals = vec![Vec::new(); n];
                    for (&i, &v) in live.iter().zip(&lt) {
                        locals[i] = vec![pcs[i], v];
                    }
                    for (&i, &v) in retired.iter().zip(&rt) {
                        locals[i] = vec![2, v];
                    }
                    let st = ProgramState::new(vec![s, t], locals);
                    if invariant(&st) {
                        out.push(st);
                    }
                }
            }
        }
    }
    out
}

pub fn audit_scope(n: usize, bound: i64) -> RespectScope {
    RespectScope {
        states: invariant_states(n, bound),
        threads: (0..n).map(ThreadId).collect(),
        exhaustive: false,
    }
}
