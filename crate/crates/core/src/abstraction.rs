//! Abstractions of program states, respect classification, and the closure
//! test that certifies convergence of an abstract reachability set.
//!
//! An action executed by a given thread *respects* an abstraction when the
//! abstract successor is determined by the abstract source alone. A disabled
//! action leaves the state unchanged, so enabledness must be determined too.
//! For the other (action, thread) pairs the abstraction supplies an
//! enumerator of abstract successors that over-approximates every concrete
//! witness. Enumerators may omit the source itself, since firing a disabled
//! action maps a state to itself.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::sync::Arc;

use serde::Serialize;
use thiserror::Error;

use crate::model::{ActionId, Program, ProgramState, ThreadId};

/// Value of an abstraction: a small integer tuple.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(transparent)]
pub struct AbstractState(pub Vec<i64>);

impl AbstractState {
    pub fn new(v: impl Into<Vec<i64>>) -> Self {
        Self(v.into())
    }
}

impl fmt::Display for AbstractState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, x) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{x}")?;
        }
        write!(f, ")")
    }
}

/// How many threads an enumerator may assume.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ThreadCount {
    Fixed(usize),
    /// Valid for every thread count of a family.
    Parametric,
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum AbstractionError {
    #[error("no successor enumerator for action {action:?} executed by {thread}")]
    MissingEnumerator { action: ActionId, thread: ThreadId },
    #[error("abstraction `{name}` cannot enumerate successors for {threads:?}")]
    UnsupportedThreadCount { name: String, threads: ThreadCount },
}

pub trait Abstraction: Send + Sync {
    fn name(&self) -> &str;

    fn alpha(&self, s: &ProgramState) -> AbstractState;

    /// Whether `action` executed by `thread` respects this abstraction.
    fn respects(&self, action: ActionId, thread: ThreadId) -> bool;

    /// Abstract successors of `a` under a disrespectful `action` by `thread`.
    fn disrespectful_successors(
        &self,
        a: &AbstractState,
        action: ActionId,
        thread: ThreadId,
        threads: ThreadCount,
    ) -> Result<Vec<AbstractState>, AbstractionError>;

    fn codomain_finite(&self) -> bool {
        true
    }
}

/// A safety property over abstract states; `true` means the state is fine.
#[derive(Clone)]
pub struct Property {
    pub name: String,
    pred: Arc<dyn Fn(&AbstractState) -> bool + Send + Sync>,
}

impl Property {
    pub fn new(name: impl Into<String>, pred: impl Fn(&AbstractState) -> bool + Send + Sync + 'static) -> Self {
        Self {
            name: name.into(),
            pred: Arc::new(pred),
        }
    }

    pub fn always() -> Self {
        Self::new("true", |_| true)
    }

    /// Violated when the first abstract component equals `g`. Built-in
    /// abstractions of finite-shared models put the shared value first.
    pub fn shared_not(g: i64) -> Self {
        Self::new(format!("shared != {g}"), move |a| a.0.first() != Some(&g))
    }

    pub fn holds(&self, a: &AbstractState) -> bool {
        (self.pred)(a)
    }
}

impl fmt::Debug for Property {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Property({})", self.name)
    }
}

pub fn alpha_image<'a>(abs: &dyn Abstraction, states: impl IntoIterator<Item = &'a ProgramState>) -> BTreeSet<AbstractState> {
    states.into_iter().map(|s| abs.alpha(s)).collect()
}

/// Witness that a set of abstract states is not closed.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ClosureCounterexample {
    pub from: AbstractState,
    pub action: ActionId,
    pub thread: ThreadId,
    pub to: AbstractState,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Closure {
    Closed,
    Open(ClosureCounterexample),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ClosureResult {
    pub outcome: Closure,
    /// Number of enumerator calls made.
    pub checks: u64,
}

impl ClosureResult {
    pub fn is_closed(&self) -> bool {
        self.outcome == Closure::Closed
    }
}

/// Threads a closure test ranges over. For a parametric check, thread 0 and
/// one representative other thread stand for all threads of a symmetric family.
pub fn closure_threads(threads: ThreadCount) -> Vec<ThreadId> {
    match threads {
        ThreadCount::Fixed(n) => (0..n).map(ThreadId).collect(),
        ThreadCount::Parametric => vec![ThreadId(0), ThreadId(1)],
    }
}

/// Checks that `set` is closed under every disrespectful (action, thread)
/// pair. Iteration is in sorted order, so the reported counterexample is the
/// least one.
pub fn closure_test(
    set: &BTreeSet<AbstractState>,
    abs: &dyn Abstraction,
    p: &Program,
    threads: ThreadCount,
) -> Result<ClosureResult, AbstractionError> {
    let thread_ids = closure_threads(threads);
    let mut checks = 0;
    for a in set {
        for action in p.actions() {
            for &t in &thread_ids {
                if abs.respects(action.id, t) {
                    continue;
                }
                checks += 1;
                let mut succ = abs.disrespectful_successors(a, action.id, t, threads)?;
                succ.sort();
                if let Some(to) = succ.into_iter().find(|b| !set.contains(b)) {
                    return Ok(ClosureResult {
                        outcome: Closure::Open(ClosureCounterexample {
                            from: a.clone(),
                            action: action.id,
                            thread: t,
                            to,
                        }),
                        checks,
                    });
                }
            }
        }
    }
    Ok(ClosureResult {
        outcome: Closure::Closed,
        checks,
    })
}

/// A finite set of states and threads over which respect is audited.
#[derive(Clone, Debug)]
pub struct RespectScope {
    pub states: Vec<ProgramState>,
    pub threads: Vec<ThreadId>,
    /// True when `states` covers the whole concrete domain, making a
    /// confirmation conclusive.
    pub exhaustive: bool,
}

impl RespectScope {
    pub fn full_domain(p: &Program) -> Option<Self> {
        Some(Self {
            states: p.full_domain()?,
            threads: p.thread_ids().collect(),
            exhaustive: true,
        })
    }

    pub fn with_threads(mut self, threads: Vec<ThreadId>) -> Self {
        self.threads = threads;
        self
    }
}

/// Two α-equal sources whose successors disagree under α.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RespectWitness {
    pub first: ProgramState,
    pub second: ProgramState,
    pub thread: ThreadId,
    pub first_next: ProgramState,
    pub second_next: ProgramState,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum RespectVerdict {
    /// No counterexample in scope; conclusive only if the scope was exhaustive.
    Confirmed { exhaustive: bool },
    Refuted(Box<RespectWitness>),
}

impl RespectVerdict {
    pub fn is_confirmed(&self) -> bool {
        matches!(self, RespectVerdict::Confirmed { .. })
    }
}

/// Searches the scope for a pair of α-equal states from which `action`
/// (fired by the same thread, disabled meaning stay put) leads to different
/// abstract states.
pub fn verify_respect(p: &Program, abs: &dyn Abstraction, action: ActionId, scope: &RespectScope) -> RespectVerdict {
    for &t in &scope.threads {
        let mut seen: HashMap<AbstractState, (ProgramState, ProgramState, AbstractState)> = HashMap::new();
        for s in &scope.states {
            let a = abs.alpha(s);
            for next in p.fire_total(action, s, t) {
                let b = abs.alpha(&next);
                match seen.get(&a) {
                    Some((first, first_next, image)) if *image != b => {
                        return RespectVerdict::Refuted(Box::new(RespectWitness {
                            first: first.clone(),
                            second: s.clone(),
                            thread: t,
                            first_next: first_next.clone(),
                            second_next: next,
                        }));
                    }
                    Some(_) => {}
                    None => {
                        seen.insert(a.clone(), (s.clone(), next, b));
                    }
                }
            }
        }
    }
    RespectVerdict::Confirmed {
        exhaustive: scope.exhaustive,
    }
}

/// Abstract successors of each source over the scope, from enabled firings only.
pub fn brute_force_successors(
    p: &Program,
    abs: &dyn Abstraction,
    action: ActionId,
    thread: ThreadId,
    states: &[ProgramState],
) -> BTreeMap<AbstractState, BTreeSet<AbstractState>> {
    let mut out: BTreeMap<AbstractState, BTreeSet<AbstractState>> = BTreeMap::new();
    for s in states {
        if let Some(next) = p.fire(action, s, thread) {
            let entry = out.entry(abs.alpha(s)).or_default();
            entry.extend(next.iter().map(|x| abs.alpha(x)));
        }
    }
    out
}

/// An enumerator that misses a brute-force successor.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EnumeratorGap {
    pub from: AbstractState,
    pub action: ActionId,
    pub thread: ThreadId,
    pub missing: AbstractState,
}

/// Checks every disrespectful enumerator of `abs` against brute force over
/// the scope. Successors equal to the source are exempt.
pub fn audit_enumerators(
    p: &Program,
    abs: &dyn Abstraction,
    scope: &RespectScope,
    threads: ThreadCount,
) -> Result<Vec<EnumeratorGap>, AbstractionError> {
    let mut gaps = Vec::new();
    for action in p.actions() {
        for &t in &scope.threads {
            if abs.respects(action.id, t) {
                continue;
            }
            for (a, truth) in brute_force_successors(p, abs, action.id, t, &scope.states) {
                let claimed: BTreeSet<AbstractState> =
                    abs.disrespectful_successors(&a, action.id, t, threads)?.into_iter().collect();
                for b in truth {
                    if b != a && !claimed.contains(&b) {
                        gaps.push(EnumeratorGap {
                            from: a.clone(),
                            action: action.id,
                            thread: t,
                            missing: b,
                        });
                    }
                }
            }
        }
    }
    Ok(gaps)
}

/// Declared respectful pairs that the scope refutes.
pub fn audit_classification(p: &Program, abs: &dyn Abstraction, scope: &RespectScope) -> Vec<(ActionId, RespectWitness)> {
    let mut bad = Vec::new();
    for action in p.actions() {
        let declared: Vec<ThreadId> = scope
            .threads
            .iter()
            .copied()
            .filter(|&t| abs.respects(action.id, t))
            .collect();
        if declared.is_empty() {
            continue;
        }
        let sub = RespectScope {
            states: scope.states.clone(),
            threads: declared,
            exhaustive: scope.exhaustive,
        };
        if let RespectVerdict::Refuted(w) = verify_respect(p, abs, action.id, &sub) {
            bad.push((action.id, *w));
        }
    }
    bad
}

/// α = the whole program state. Every action respects it.
#[derive(Clone, Debug, Default)]
pub struct Identity;

impl Abstraction for Identity {
    fn name(&self) -> &str {
        "identity"
    }

    fn alpha(&self, s: &ProgramState) -> AbstractState {
        let mut v = s.shared.clone();
        for l in &s.locals {
            v.push(l.len() as i64);
            v.extend_from_slice(l);
        }
        AbstractState(v)
    }

    fn respects(&self, _: ActionId, _: ThreadId) -> bool {
        true
    }

    fn disrespectful_successors(
        &self,
        _: &AbstractState,
        action: ActionId,
        thread: ThreadId,
        _: ThreadCount,
    ) -> Result<Vec<AbstractState>, AbstractionError> {
        Err(AbstractionError::MissingEnumerator { action, thread })
    }
}

type AlphaFn = Arc<dyn Fn(&ProgramState) -> AbstractState + Send + Sync>;

/// Abstraction over a finite-domain program whose classification and
/// successor sets are computed by exhaustive enumeration of the domain.
pub struct Exhaustive {
    name: String,
    alpha: AlphaFn,
    n: usize,
    disrespect: BTreeSet<(ActionId, ThreadId)>,
    successors: HashMap<(AbstractState, ActionId, ThreadId), Vec<AbstractState>>,
}

impl Exhaustive {
    /// Returns `None` if the program's domain is not finite.
    pub fn new(name: impl Into<String>, p: &Program, alpha: impl Fn(&ProgramState) -> AbstractState + Send + Sync + 'static) -> Option<Self> {
        let mut this = Self {
            name: name.into(),
            alpha: Arc::new(alpha),
            n: p.thread_count(),
            disrespect: BTreeSet::new(),
            successors: HashMap::new(),
        };
        let states = p.full_domain()?;
        for action in p.actions() {
            for t in p.thread_ids() {
                let scope = RespectScope {
                    states: states.clone(),
                    threads: vec![t],
                    exhaustive: true,
                };
                if verify_respect(p, &this, action.id, &scope).is_confirmed() {
                    continue;
                }
                this.disrespect.insert((action.id, t));
                for (a, succ) in brute_force_successors(p, &this, action.id, t, &states) {
                    this.successors.insert((a, action.id, t), succ.into_iter().collect());
                }
            }
        }
        Some(this)
    }

    /// Projection onto the shared state.
    pub fn shared_only(p: &Program) -> Option<Self> {
        Self::new("shared-only", p, |s| AbstractState(s.shared.clone()))
    }
}

impl Abstraction for Exhaustive {
    fn name(&self) -> &str {
        &self.name
    }

    fn alpha(&self, s: &ProgramState) -> AbstractState {
        (self.alpha)(s)
    }

    fn respects(&self, action: ActionId, thread: ThreadId) -> bool {
        !self.disrespect.contains(&(action, thread))
    }

    fn disrespectful_successors(
        &self,
        a: &AbstractState,
        action: ActionId,
        thread: ThreadId,
        threads: ThreadCount,
    ) -> Result<Vec<AbstractState>, AbstractionError> {
        if threads != ThreadCount::Fixed(self.n) {
            return Err(AbstractionError::UnsupportedThreadCount {
                name: self.name.clone(),
                threads,
            });
        }
        if !self.disrespect.contains(&(action, thread)) {
            return Err(AbstractionError::MissingEnumerator { action, thread });
        }
        Ok(self
            .successors
            .get(&(a.clone(), action, thread))
            .cloned()
            .unwrap_or_default())
    }
}

type PcFn = Arc<dyn Fn(&ProgramState) -> i64 + Send + Sync>;
type PredFn = Arc<dyn Fn(&ProgramState) -> bool + Send + Sync>;
type ClassifyFn = Arc<dyn Fn(ActionId, ThreadId) -> bool + Send + Sync>;
type EnumFn = Arc<dyn Fn(&AbstractState, ActionId, ThreadId, ThreadCount) -> Vec<AbstractState> + Send + Sync>;

/// Abstraction valued `(pc of thread 0, b1, ..., bk)` for predicates `b`.
/// Classification and successor enumeration come from the model author.
#[derive(Clone)]
pub struct PredicateAbstraction {
    name: String,
    pc: PcFn,
    predicates: Vec<(String, PredFn)>,
    disrespects: ClassifyFn,
    enumerator: EnumFn,
}

/// Builds a predicate abstraction in which every action respects.
pub fn make_predicate_abstraction(
    name: impl Into<String>,
    pc: impl Fn(&ProgramState) -> i64 + Send + Sync + 'static,
    predicates: Vec<(String, PredFn)>,
) -> PredicateAbstraction {
    PredicateAbstraction {
        name: name.into(),
        pc: Arc::new(pc),
        predicates,
        disrespects: Arc::new(|_, _| false),
        enumerator: Arc::new(|_, _, _, _| Vec::new()),
    }
}

/// Wraps a predicate closure for [`make_predicate_abstraction`].
pub fn predicate(name: impl Into<String>, f: impl Fn(&ProgramState) -> bool + Send + Sync + 'static) -> (String, PredFn) {
    (name.into(), Arc::new(f))
}

impl PredicateAbstraction {
    pub fn with_disrespect(
        mut self,
        disrespects: impl Fn(ActionId, ThreadId) -> bool + Send + Sync + 'static,
        enumerator: impl Fn(&AbstractState, ActionId, ThreadId, ThreadCount) -> Vec<AbstractState> + Send + Sync + 'static,
    ) -> Self {
        self.disrespects = Arc::new(disrespects);
        self.enumerator = Arc::new(enumerator);
        self
    }

    pub fn predicate_names(&self) -> impl Iterator<Item = &str> {
        self.predicates.iter().map(|(n, _)| n.as_str())
    }
}

impl Abstraction for PredicateAbstraction {
    fn name(&self) -> &str {
        &self.name
    }

    fn alpha(&self, s: &ProgramState) -> AbstractState {
        let mut v = Vec::with_capacity(1 + self.predicates.len());
        v.push((self.pc)(s));
        v.extend(self.predicates.iter().map(|(_, p)| p(s) as i64));
        AbstractState(v)
    }

    fn respects(&self, action: ActionId, thread: ThreadId) -> bool {
        !(self.disrespects)(action, thread)
    }

    fn disrespectful_successors(
        &self,
        a: &AbstractState,
        action: ActionId,
        thread: ThreadId,
        threads: ThreadCount,
    ) -> Result<Vec<AbstractState>, AbstractionError> {
        if self.respects(action, thread) {
            return Err(AbstractionError::MissingEnumerator { action, thread });
        }
        Ok((self.enumerator)(a, action, thread, threads))
    }
}
