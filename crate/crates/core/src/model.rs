//! Programs, states, and the asynchronous single-thread step relation.
//!
//! A program is a set of threads over one shared state. Each thread owns a
//! local state and a procedure (a set of actions). A step executes one
//! enabled action of one thread and leaves every other thread's local state
//! untouched. A thread with no enabled action stutters.

use std::collections::BTreeSet;
use std::fmt;
use std::sync::Arc;

use serde::Serialize;
use thiserror::Error;

/// Index of a thread within a program, in `[0, n)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(transparent)]
pub struct ThreadId(pub usize);

impl ThreadId {
    pub fn index(self) -> usize {
        self.0
    }
}

impl fmt::Display for ThreadId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "T{}", self.0)
    }
}

/// Opaque handle of an action, assigned by [`ProgramBuilder`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(transparent)]
pub struct ActionId(pub usize);

/// A concrete program state: shared components plus one local vector per thread.
///
/// For pushdown models a local vector is a stack, top first.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct ProgramState {
    pub shared: Vec<i64>,
    pub locals: Vec<Vec<i64>>,
}

impl ProgramState {
    pub fn new(shared: Vec<i64>, locals: Vec<Vec<i64>>) -> Self {
        Self { shared, locals }
    }

    pub fn thread_count(&self) -> usize {
        self.locals.len()
    }

    pub fn local(&self, t: ThreadId) -> &[i64] {
        &self.locals[t.0]
    }

    /// Copy of `self` with thread `t`'s local replaced and the shared part set.
    pub fn with_step(&self, t: ThreadId, shared: Vec<i64>, local: Vec<i64>) -> Self {
        let mut locals = self.locals.clone();
        locals[t.0] = local;
        Self { shared, locals }
    }
}

fn write_vec(f: &mut fmt::Formatter<'_>, v: &[i64]) -> fmt::Result {
    for (i, x) in v.iter().enumerate() {
        if i > 0 {
            write!(f, ",")?;
        }
        write!(f, "{x}")?;
    }
    Ok(())
}

impl fmt::Display for ProgramState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "<")?;
        write_vec(f, &self.shared)?;
        write!(f, " |")?;
        for l in &self.locals {
            write!(f, " [")?;
            write_vec(f, l)?;
            write!(f, "]")?;
        }
        write!(f, ">")
    }
}

/// Domain of one integer component.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ValueDomain {
    /// Values in `0..size`.
    Finite { size: i64 },
    Unbounded,
}

impl ValueDomain {
    pub fn contains(self, v: i64) -> bool {
        match self {
            ValueDomain::Finite { size } => (0..size).contains(&v),
            ValueDomain::Unbounded => true,
        }
    }
}

/// Shape of one thread's local state.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum LocalDomain {
    /// Fixed-arity vector, one domain per component.
    Values(Vec<ValueDomain>),
    /// Stack of symbols in `0..alphabet`, any depth, top first.
    Stack { alphabet: i64 },
}

impl LocalDomain {
    pub fn finite(size: i64) -> Self {
        LocalDomain::Values(vec![ValueDomain::Finite { size }])
    }

    fn check(&self, local: &[i64]) -> Option<String> {
        match self {
            LocalDomain::Values(doms) => {
                if doms.len() != local.len() {
                    return Some(format!("arity {} != {}", local.len(), doms.len()));
                }
                doms.iter()
                    .zip(local)
                    .position(|(d, v)| !d.contains(*v))
                    .map(|i| format!("component {i} = {} out of domain", local[i]))
            }
            LocalDomain::Stack { alphabet } => local
                .iter()
                .find(|s| !(0..*alphabet).contains(*s))
                .map(|s| format!("stack symbol {s} outside alphabet of size {alphabet}")),
        }
    }
}

/// Effect of an action on `(shared, own local)`. An empty result means disabled.
pub type EffectFn = dyn Fn(&[i64], &[i64]) -> Vec<(Vec<i64>, Vec<i64>)> + Send + Sync;

/// Declared source and target of a rule, kept for domain validation.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RuleEndpoint {
    pub from_shared: Vec<i64>,
    pub from_local: Vec<i64>,
    pub to_shared: Vec<i64>,
    pub to_local: Vec<i64>,
}

#[derive(Clone)]
pub struct Action {
    pub id: ActionId,
    pub label: String,
    effect: Arc<EffectFn>,
    endpoints: Vec<RuleEndpoint>,
}

impl Action {
    pub fn apply(&self, shared: &[i64], local: &[i64]) -> Vec<(Vec<i64>, Vec<i64>)> {
        (self.effect)(shared, local)
    }

    pub fn endpoints(&self) -> &[RuleEndpoint] {
        &self.endpoints
    }
}

impl fmt::Debug for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Action")
            .field("id", &self.id)
            .field("label", &self.label)
            .finish_non_exhaustive()
    }
}

#[derive(Clone, Debug)]
pub struct Thread {
    pub name: String,
    /// Template the thread was instantiated from; copies share actions.
    pub template: String,
    pub actions: Vec<ActionId>,
    pub local_domain: LocalDomain,
}

#[derive(Clone, Debug)]
pub struct Program {
    pub name: String,
    pub shared_domain: Vec<ValueDomain>,
    actions: Vec<Action>,
    threads: Vec<Thread>,
    initial: Vec<ProgramState>,
}

impl Program {
    pub fn thread_count(&self) -> usize {
        self.threads.len()
    }

    pub fn threads(&self) -> &[Thread] {
        &self.threads
    }

    pub fn thread_ids(&self) -> impl Iterator<Item = ThreadId> {
        (0..self.threads.len()).map(ThreadId)
    }

    pub fn actions(&self) -> &[Action] {
        &self.actions
    }

    pub fn action(&self, id: ActionId) -> &Action {
        &self.actions[id.0]
    }

    pub fn action_by_label(&self, label: &str) -> Option<ActionId> {
        self.actions.iter().find(|a| a.label == label).map(|a| a.id)
    }

    pub fn initial(&self) -> &[ProgramState] {
        &self.initial
    }

    pub fn is_initial(&self, s: &ProgramState) -> bool {
        self.initial.contains(s)
    }

    /// Successors of `s` when thread `t` executes `action`, or `None` if the
    /// action is disabled there (or not part of `t`'s procedure).
    pub fn fire(&self, action: ActionId, s: &ProgramState, t: ThreadId) -> Option<Vec<ProgramState>> {
        if !self.threads[t.0].actions.contains(&action) {
            return None;
        }
        let effects = self.actions[action.0].apply(&s.shared, &s.locals[t.0]);
        if effects.is_empty() {
            return None;
        }
        let mut out: Vec<ProgramState> = effects
            .into_iter()
            .map(|(g, l)| s.with_step(t, g, l))
            .collect();
        out.sort();
        out.dedup();
        Some(out)
    }

    /// Like [`Program::fire`], but a disabled action yields `{s}`.
    pub fn fire_total(&self, action: ActionId, s: &ProgramState, t: ThreadId) -> Vec<ProgramState> {
        self.fire(action, s, t).unwrap_or_else(|| vec![s.clone()])
    }

    /// All states reachable by one step of thread `t`; `{s}` if `t` is blocked.
    pub fn thread_successors(&self, s: &ProgramState, t: ThreadId) -> Vec<ProgramState> {
        let mut out = BTreeSet::new();
        for &a in &self.threads[t.0].actions {
            for (g, l) in self.actions[a.0].apply(&s.shared, &s.locals[t.0]) {
                out.insert(s.with_step(t, g, l));
            }
        }
        if out.is_empty() {
            return vec![s.clone()];
        }
        out.into_iter().collect()
    }

    /// Enumerates every state of a program whose domains are all finite.
    /// Returns `None` for stacks or unbounded components.
    pub fn full_domain(&self) -> Option<Vec<ProgramState>> {
        let shared = product_of(&self.shared_domain)?;
        let mut per_thread = Vec::with_capacity(self.threads.len());
        for th in &self.threads {
            match &th.local_domain {
                LocalDomain::Values(doms) => per_thread.push(product_of(doms)?),
                LocalDomain::Stack { .. } => return None,
            }
        }
        let mut locals_all: Vec<Vec<Vec<i64>>> = vec![Vec::new()];
        for options in &per_thread {
            let mut next = Vec::with_capacity(locals_all.len() * options.len());
            for prefix in &locals_all {
                for o in options {
                    let mut v = prefix.clone();
                    v.push(o.clone());
                    next.push(v);
                }
            }
            locals_all = next;
        }
        let mut out = Vec::with_capacity(shared.len() * locals_all.len());
        for g in &shared {
            for ls in &locals_all {
                out.push(ProgramState::new(g.clone(), ls.clone()));
            }
        }
        Some(out)
    }
}

fn product_of(doms: &[ValueDomain]) -> Option<Vec<Vec<i64>>> {
    let mut acc: Vec<Vec<i64>> = vec![Vec::new()];
    for d in doms {
        let size = match d {
            ValueDomain::Finite { size } => *size,
            ValueDomain::Unbounded => return None,
        };
        acc = acc
            .into_iter()
            .flat_map(|p| {
                (0..size).map(move |v| {
                    let mut q = p.clone();
                    q.push(v);
                    q
                })
            })
            .collect();
    }
    Some(acc)
}

/// Incremental construction of a [`Program`].
#[derive(Default)]
pub struct ProgramBuilder {
    name: String,
    shared_domain: Vec<ValueDomain>,
    actions: Vec<Action>,
    threads: Vec<Thread>,
    initial: Vec<ProgramState>,
}

impl ProgramBuilder {
    pub fn new(name: impl Into<String>, shared_domain: Vec<ValueDomain>) -> Self {
        Self {
            name: name.into(),
            shared_domain,
            ..Self::default()
        }
    }

    pub fn action<F>(&mut self, label: impl Into<String>, effect: F) -> ActionId
    where
        F: Fn(&[i64], &[i64]) -> Vec<(Vec<i64>, Vec<i64>)> + Send + Sync + 'static,
    {
        self.action_with_endpoints(label, effect, Vec::new())
    }

    pub fn action_with_endpoints<F>(
        &mut self,
        label: impl Into<String>,
        effect: F,
        endpoints: Vec<RuleEndpoint>,
    ) -> ActionId
    where
        F: Fn(&[i64], &[i64]) -> Vec<(Vec<i64>, Vec<i64>)> + Send + Sync + 'static,
    {
        let id = ActionId(self.actions.len());
        self.actions.push(Action {
            id,
            label: label.into(),
            effect: Arc::new(effect),
            endpoints,
        });
        id
    }

    pub fn thread(
        &mut self,
        name: impl Into<String>,
        template: impl Into<String>,
        actions: Vec<ActionId>,
        local_domain: LocalDomain,
    ) -> ThreadId {
        let id = ThreadId(self.threads.len());
        self.threads.push(Thread {
            name: name.into(),
            template: template.into(),
            actions,
            local_domain,
        });
        id
    }

    pub fn initial(&mut self, s: ProgramState) -> &mut Self {
        if !self.initial.contains(&s) {
            self.initial.push(s);
        }
        self
    }

    pub fn build(self) -> Program {
        Program {
            name: self.name,
            shared_domain: self.shared_domain,
            actions: self.actions,
            threads: self.threads,
            initial: self.initial,
        }
    }
}

/// One problem found by [`validate_program`].
#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum Diagnostic {
    #[error("program has no initial state")]
    NoInitialState,
    #[error("program has no threads")]
    NoThreads,
    #[error("initial state {index}: {found} local states for {expected} threads")]
    LocalsArity { index: usize, expected: usize, found: usize },
    #[error("initial state {index}: shared part {detail}")]
    InitialShared { index: usize, detail: String },
    #[error("initial state {index}: thread {thread} local {detail}")]
    InitialLocal { index: usize, thread: usize, detail: String },
    #[error("thread {thread} refers to unknown action {action}")]
    UnknownAction { thread: usize, action: usize },
    #[error("rule `{label}`: {detail}")]
    RuleDomain { label: String, detail: String },
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub diagnostics: Vec<Diagnostic>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.diagnostics.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for d in &self.diagnostics {
            writeln!(f, "{d}")?;
        }
        Ok(())
    }
}

fn check_shared(doms: &[ValueDomain], g: &[i64]) -> Option<String> {
    if doms.len() != g.len() {
        return Some(format!("arity {} != {}", g.len(), doms.len()));
    }
    doms.iter()
        .zip(g)
        .position(|(d, v)| !d.contains(*v))
        .map(|i| format!("component {i} = {} out of domain", g[i]))
}

/// Checks arities, domains of initial states and declared rule endpoints.
pub fn validate_program(p: &Program) -> ValidationReport {
    let mut diagnostics = Vec::new();
    let n = p.threads.len();
    if n == 0 {
        diagnostics.push(Diagnostic::NoThreads);
    }
    if p.initial.is_empty() {
        diagnostics.push(Diagnostic::NoInitialState);
    }
    for (index, s) in p.initial.iter().enumerate() {
        if s.locals.len() != n {
            diagnostics.push(Diagnostic::LocalsArity {
                index,
                expected: n,
                found: s.locals.len(),
            });
            continue;
        }
        if let Some(detail) = check_shared(&p.shared_domain, &s.shared) {
            diagnostics.push(Diagnostic::InitialShared { index, detail });
        }
        for (thread, (th, l)) in p.threads.iter().zip(&s.locals).enumerate() {
            if let Some(detail) = th.local_domain.check(l) {
                diagnostics.push(Diagnostic::InitialLocal { index, thread, detail });
            }
        }
    }
    for (ti, th) in p.threads.iter().enumerate() {
        for a in &th.actions {
            if a.0 >= p.actions.len() {
                diagnostics.push(Diagnostic::UnknownAction { thread: ti, action: a.0 });
            }
        }
    }
    for action in &p.actions {
        let owners: Vec<&Thread> = p
            .threads
            .iter()
            .filter(|t| t.actions.contains(&action.id))
            .collect();
        for e in &action.endpoints {
            for (what, g) in [("source", &e.from_shared), ("target", &e.to_shared)] {
                if let Some(d) = check_shared(&p.shared_domain, g) {
                    diagnostics.push(Diagnostic::RuleDomain {
                        label: action.label.clone(),
                        detail: format!("{what} shared {d}"),
                    });
                }
            }
            for th in &owners {
                for (what, l) in [("source", &e.from_local), ("target", &e.to_local)] {
                    if let Some(d) = th.local_domain.check(l) {
                        diagnostics.push(Diagnostic::RuleDomain {
                            label: action.label.clone(),
                            detail: format!("{what} local of {} {d}", th.name),
                        });
                    }
                }
            }
        }
    }
    diagnostics.dedup();
    ValidationReport { diagnostics }
}
