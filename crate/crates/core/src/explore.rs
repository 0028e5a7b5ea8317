//! Round- and delay-bounded Round-Robin exploration with convergence detection.
//!
//! States carry scheduling metadata: the thread that produced them (the
//! finder), the rounds and the delays taken so far. Two scheduled states are
//! the same state when program state and finder agree. For each such key
//! the reach set keeps every non-dominated `(rounds, delays)` pair, so a
//! state first found late in a round but with few delays is still expanded
//! when the delay bound grows.
//!
//! [`druba`] raises the round bound until an iteration finds no new
//! abstract state, then raises the delay bound. A new abstract state during
//! the delay phase restarts the round phase. After `n - 1` quiet delay
//! increments the closure test decides between safe and unknown.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::time::{Duration, Instant};

use serde::Serialize;

use crate::abstraction::{closure_test, Abstraction, AbstractState, AbstractionError, Closure, ClosureCounterexample, Property, ThreadCount};
use crate::model::{Program, ProgramState, ThreadId};
use crate::schedule::ScheduleFunction;

/// A program state with scheduling metadata. Equality ignores the counters.
#[derive(Clone, Debug, Eq, Serialize)]
pub struct SchedState {
    pub prog: ProgramState,
    pub finder: ThreadId,
    pub rounds_taken: u32,
    pub delays_taken: u32,
}

impl PartialEq for SchedState {
    fn eq(&self, other: &Self) -> bool {
        self.prog == other.prog && self.finder == other.finder
    }
}

impl std::hash::Hash for SchedState {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        self.prog.hash(state);
        self.finder.hash(state);
    }
}

impl SchedState {
    /// Scheduled form of an initial state: the next thread to run is 0.
    pub fn initial(prog: ProgramState, n: usize) -> Self {
        Self {
            prog,
            finder: ThreadId(n - 1),
            rounds_taken: 0,
            delays_taken: 0,
        }
    }

    /// Whether the next thread may run without exceeding `r` rounds.
    pub fn schedulable(&self, n: usize, r: u32) -> bool {
        if self.finder.0 + 1 < n {
            self.rounds_taken <= r
        } else {
            self.rounds_taken < r
        }
    }

    /// Scheduling metadata after the turn passes to the next thread.
    fn advance(&self, n: usize) -> (ThreadId, u32) {
        let t = (self.finder.0 + 1) % n;
        let rt = if t == 0 { self.rounds_taken + 1 } else { self.rounds_taken };
        (ThreadId(t), rt)
    }

    /// The state with the current thread skipped.
    pub fn delayed(&self, n: usize) -> Self {
        let (finder, rounds_taken) = self.advance(n);
        Self {
            prog: self.prog.clone(),
            finder,
            rounds_taken,
            delays_taken: self.delays_taken + 1,
        }
    }
}

/// Successors of `u` when the next thread in turn takes one step.
pub fn image(p: &Program, u: &SchedState) -> Vec<SchedState> {
    let (t, rt) = u.advance(p.thread_count());
    p.thread_successors(&u.prog, t)
        .into_iter()
        .map(|prog| SchedState {
            prog,
            finder: t,
            rounds_taken: rt,
            delays_taken: u.delays_taken,
        })
        .collect()
}

/// A bound pair visited by the explorer.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct GridPoint {
    pub r: u32,
    pub d: u32,
}

/// A path to a bad state and the schedule that produces it.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Witness {
    pub schedule: ScheduleFunction,
    pub path: Vec<ProgramState>,
    pub found_at: GridPoint,
}

impl Witness {
    pub fn last_state(&self) -> &ProgramState {
        self.path.last().expect("witness path is never empty")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Step {
    Image(ThreadId),
    Delay,
}

#[derive(Clone, Debug)]
struct Entry {
    key: usize,
    rounds: u32,
    delays: u32,
    live: bool,
    expanded: bool,
    delayed: bool,
    parent: Option<(usize, Step)>,
}

/// Result of inserting one scheduled state.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Insertion {
    /// An entry with no more rounds and no more delays already exists.
    Dominated,
    Inserted { entry: usize, new_key: bool, new_abstract: bool },
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct MergeOutcome {
    pub inserted: usize,
    pub new_abstract: bool,
}

/// States found so far, keyed on (program state, finder).
#[derive(Clone, Debug, Default)]
pub struct ReachSet {
    keys: Vec<(ProgramState, ThreadId)>,
    key_index: HashMap<(ProgramState, ThreadId), usize>,
    key_entries: Vec<Vec<usize>>,
    entries: Vec<Entry>,
    abs_states: BTreeSet<AbstractState>,
    round_index: BTreeMap<u32, Vec<usize>>,
    delay_index: BTreeMap<u32, Vec<usize>>,
}

impl ReachSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Number of distinct (program state, finder) keys.
    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    pub fn abstract_states(&self) -> &BTreeSet<AbstractState> {
        &self.abs_states
    }

    pub fn contains(&self, s: &SchedState) -> bool {
        self.key_index.contains_key(&(s.prog.clone(), s.finder))
    }

    /// Stored metadata for a key, one pair per non-dominated entry.
    pub fn metadata(&self, prog: &ProgramState, finder: ThreadId) -> Vec<(u32, u32)> {
        match self.key_index.get(&(prog.clone(), finder)) {
            Some(&k) => self.key_entries[k]
                .iter()
                .map(|&e| (self.entries[e].rounds, self.entries[e].delays))
                .collect(),
            None => Vec::new(),
        }
    }

    /// Projection onto program states.
    pub fn program_states(&self) -> BTreeSet<ProgramState> {
        self.keys.iter().map(|(p, _)| p.clone()).collect()
    }

    /// Live scheduled states, one per non-dominated metadata pair.
    pub fn states(&self) -> impl Iterator<Item = SchedState> + '_ {
        self.entries.iter().filter(|e| e.live).map(|e| {
            let (prog, finder) = &self.keys[e.key];
            SchedState {
                prog: prog.clone(),
                finder: *finder,
                rounds_taken: e.rounds,
                delays_taken: e.delays,
            }
        })
    }

    /// Live states whose stored round count is `r`.
    pub fn round_frontier(&self, r: u32) -> Vec<SchedState> {
        self.level(&self.round_index, r)
    }

    /// Live states whose stored delay count is `d`.
    pub fn delay_frontier(&self, d: u32) -> Vec<SchedState> {
        self.level(&self.delay_index, d)
    }

    fn level(&self, index: &BTreeMap<u32, Vec<usize>>, v: u32) -> Vec<SchedState> {
        index
            .get(&v)
            .into_iter()
            .flatten()
            .filter(|&&e| self.entries[e].live)
            .map(|&e| self.sched_state(e))
            .collect()
    }

    fn sched_state(&self, e: usize) -> SchedState {
        let entry = &self.entries[e];
        let (prog, finder) = &self.keys[entry.key];
        SchedState {
            prog: prog.clone(),
            finder: *finder,
            rounds_taken: entry.rounds,
            delays_taken: entry.delays,
        }
    }

    /// Inserts `s` unless an existing entry for its key dominates it.
    /// Entries dominated by `s` are retired.
    fn insert(&mut self, abs: &dyn Abstraction, s: SchedState, parent: Option<(usize, Step)>) -> Insertion {
        let (key, new_key) = match self.key_index.get(&(s.prog.clone(), s.finder)) {
            Some(&k) => {
                let ids = &self.key_entries[k];
                if ids.iter().any(|&e| {
                    let x = &self.entries[e];
                    x.rounds <= s.rounds_taken && x.delays <= s.delays_taken
                }) {
                    return Insertion::Dominated;
                }
                let mut kept = Vec::with_capacity(ids.len());
                for &e in ids {
                    let x = &mut self.entries[e];
                    if s.rounds_taken <= x.rounds && s.delays_taken <= x.delays {
                        x.live = false;
                    } else {
                        kept.push(e);
                    }
                }
                self.key_entries[k] = kept;
                (k, false)
            }
            None => {
                let k = self.keys.len();
                self.key_index.insert((s.prog.clone(), s.finder), k);
                self.keys.push((s.prog.clone(), s.finder));
                self.key_entries.push(Vec::new());
                (k, true)
            }
        };
        let new_abstract = new_key && self.abs_states.insert(abs.alpha(&s.prog));
        let id = self.entries.len();
        self.entries.push(Entry {
            key,
            rounds: s.rounds_taken,
            delays: s.delays_taken,
            live: true,
            expanded: false,
            delayed: false,
            parent,
        });
        self.key_entries[key].push(id);
        self.round_index.entry(s.rounds_taken).or_default().push(id);
        self.delay_index.entry(s.delays_taken).or_default().push(id);
        Insertion::Inserted {
            entry: id,
            new_key,
            new_abstract,
        }
    }

    /// Adds a batch of scheduled states and reports whether the abstract set grew.
    pub fn merge_into(&mut self, abs: &dyn Abstraction, states: impl IntoIterator<Item = SchedState>) -> MergeOutcome {
        let mut out = MergeOutcome::default();
        for s in states {
            if let Insertion::Inserted { new_abstract, .. } = self.insert(abs, s, None) {
                out.inserted += 1;
                out.new_abstract |= new_abstract;
            }
        }
        out
    }

    fn witness(&self, mut e: usize, n: usize, at: GridPoint) -> Witness {
        let mut threads = Vec::new();
        let mut path = vec![self.keys[self.entries[e].key].0.clone()];
        while let Some((parent, step)) = self.entries[e].parent {
            if let Step::Image(t) = step {
                threads.push(t);
                path.push(self.keys[self.entries[parent].key].0.clone());
            }
            e = parent;
        }
        threads.reverse();
        path.reverse();
        Witness {
            schedule: ScheduleFunction::new(n, threads),
            path,
            found_at: at,
        }
    }
}

/// Resource limits; `None` means unlimited.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Caps {
    pub max_r: Option<u32>,
    pub max_d: Option<u32>,
    pub max_states: Option<usize>,
    pub timeout: Option<Duration>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum UnknownReason {
    ClosureFailed(ClosureCounterexample),
    RoundCap { max_r: u32 },
    DelayCap { max_d: u32 },
    StateCap { max_states: usize },
    Timeout { ms: u128 },
    NotConverged,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Safe,
    Violation,
    Unknown,
}

#[derive(Clone, Debug, Serialize)]
pub struct VerdictReport {
    pub verdict: Verdict,
    pub reason: Option<UnknownReason>,
    pub witness: Option<Witness>,
    pub abs_states: BTreeSet<AbstractState>,
    /// Bounds reached when the run stopped.
    pub r_max: u32,
    pub d_max: u32,
    pub reached_states: usize,
    pub image_calls_pre_plateau: u64,
    pub image_calls_final_plateau: u64,
    pub closure_checks: u64,
    /// Every bound pair the run passed through, in order.
    pub visited: Vec<GridPoint>,
    pub elapsed: Duration,
}

impl VerdictReport {
    pub fn image_calls_total(&self) -> u64 {
        self.image_calls_pre_plateau + self.image_calls_final_plateau
    }
}

/// Why saturation stopped early.
#[derive(Clone, Debug)]
pub enum Halt {
    Violation(Box<Witness>),
    Cap(UnknownReason),
}

/// Incremental explorer. Bounds only grow; raising a bound re-activates the
/// entries whose expansion or delay the old bound forbade.
pub struct Explorer<'a> {
    program: &'a Program,
    abs: &'a dyn Abstraction,
    prop: &'a Property,
    caps: Caps,
    reach: ReachSet,
    r: u32,
    d: u32,
    worklist: VecDeque<usize>,
    image_calls: u64,
    new_abstract: bool,
    started: Instant,
    halted: Option<Halt>,
}

impl<'a> Explorer<'a> {
    /// Seeds the reach set with the initial states at bounds (0, 0).
    pub fn new(program: &'a Program, abs: &'a dyn Abstraction, prop: &'a Property, caps: Caps) -> Self {
        let mut ex = Self {
            program,
            abs,
            prop,
            caps,
            reach: ReachSet::new(),
            r: 0,
            d: 0,
            worklist: VecDeque::new(),
            image_calls: 0,
            new_abstract: false,
            started: Instant::now(),
            halted: None,
        };
        let n = program.thread_count();
        for s in program.initial() {
            if let Err(h) = ex.insert(SchedState::initial(s.clone(), n), None) {
                ex.halted = Some(h);
                break;
            }
        }
        ex.worklist.clear();
        ex
    }

    pub fn bounds(&self) -> GridPoint {
        GridPoint { r: self.r, d: self.d }
    }

    pub fn reach(&self) -> &ReachSet {
        &self.reach
    }

    pub fn image_calls(&self) -> u64 {
        self.image_calls
    }

    pub fn halted(&self) -> Option<&Halt> {
        self.halted.as_ref()
    }

    fn insert(&mut self, s: SchedState, parent: Option<(usize, Step)>) -> Result<(), Halt> {
        if let Insertion::Inserted { entry, new_abstract, .. } = self.reach.insert(self.abs, s, parent) {
            self.worklist.push_back(entry);
            if new_abstract {
                self.new_abstract = true;
                let a = self.abs.alpha(&self.reach.keys[self.reach.entries[entry].key].0);
                if !self.prop.holds(&a) {
                    let w = self.reach.witness(entry, self.program.thread_count(), self.bounds());
                    return Err(Halt::Violation(Box::new(w)));
                }
            }
            if let Some(max) = self.caps.max_states {
                if self.reach.len() > max {
                    return Err(Halt::Cap(UnknownReason::StateCap { max_states: max }));
                }
            }
        }
        Ok(())
    }

    fn check_time(&self) -> Result<(), Halt> {
        if let Some(limit) = self.caps.timeout {
            if self.started.elapsed() > limit {
                return Err(Halt::Cap(UnknownReason::Timeout { ms: limit.as_millis() }));
            }
        }
        Ok(())
    }

    fn saturate(&mut self) -> Result<(), Halt> {
        let n = self.program.thread_count();
        let mut pops: u64 = 0;
        while let Some(e) = self.worklist.pop_front() {
            pops += 1;
            if pops.is_multiple_of(1024) {
                self.check_time()?;
            }
            if !self.reach.entries[e].live {
                continue;
            }
            let u = self.reach.sched_state(e);
            if !self.reach.entries[e].expanded && u.schedulable(n, self.r) {
                self.reach.entries[e].expanded = true;
                self.image_calls += 1;
                let (t, _) = u.advance(n);
                for v in image(self.program, &u) {
                    self.insert(v, Some((e, Step::Image(t))))?;
                }
            }
            if !self.reach.entries[e].delayed && u.delays_taken < self.d {
                self.reach.entries[e].delayed = true;
                self.insert(u.delayed(n), Some((e, Step::Delay)))?;
            }
        }
        Ok(())
    }

    fn run(&mut self) -> Result<bool, Halt> {
        if let Some(h) = &self.halted {
            return Err(h.clone());
        }
        self.new_abstract = false;
        match self.saturate() {
            Ok(()) => Ok(self.new_abstract),
            Err(h) => {
                self.halted = Some(h.clone());
                Err(h)
            }
        }
    }

    /// Raises the round bound to `r` and explores. Returns whether a new
    /// abstract state appeared.
    pub fn raise_rounds(&mut self, r: u32) -> Result<bool, Halt> {
        let old = self.r;
        self.r = self.r.max(r);
        let pending: Vec<usize> = self
            .reach
            .round_index
            .range(old..)
            .flat_map(|(_, ids)| ids.iter().copied())
            .filter(|&e| self.reach.entries[e].live && !self.reach.entries[e].expanded)
            .collect();
        self.worklist.extend(pending);
        self.run()
    }

    /// Raises the delay bound to `d` and explores.
    pub fn raise_delays(&mut self, d: u32) -> Result<bool, Halt> {
        let old = self.d;
        self.d = self.d.max(d);
        let pending: Vec<usize> = self
            .reach
            .delay_index
            .range(old..)
            .flat_map(|(_, ids)| ids.iter().copied())
            .filter(|&e| self.reach.entries[e].live && !self.reach.entries[e].delayed)
            .collect();
        self.worklist.extend(pending);
        self.run()
    }

    pub fn elapsed(&self) -> Duration {
        self.started.elapsed()
    }
}

/// Round increment per round-loop iteration.
pub const ROUND_STRIDE: u32 = 2;

/// Called after every bound increment with the new bounds and reach set.
pub type Observer<'o> = dyn FnMut(GridPoint, &ReachSet) + 'o;

/// Runs the round/delay plateau loops and the closure test.
pub fn druba(p: &Program, abs: &dyn Abstraction, prop: &Property, caps: Caps) -> Result<VerdictReport, AbstractionError> {
    druba_observed(p, abs, prop, caps, &mut |_, _| {})
}

/// [`druba`] with a callback after every bound increment.
pub fn druba_observed(
    p: &Program,
    abs: &dyn Abstraction,
    prop: &Property,
    caps: Caps,
    observer: &mut Observer<'_>,
) -> Result<VerdictReport, AbstractionError> {
    let n = p.thread_count();
    let mut ex = Explorer::new(p, abs, prop, caps);
    let mut visited = vec![ex.bounds()];
    observer(ex.bounds(), ex.reach());
    let mut plateau_start = 0;
    let mut closure_checks = 0;

    let outcome: Result<Option<ClosureCounterexample>, Halt> = 'outer: loop {
        if let Some(h) = ex.halted() {
            break Err(h.clone());
        }
        loop {
            let next = ex.bounds().r + ROUND_STRIDE;
            if caps.max_r.is_some_and(|m| next > m) {
                break 'outer Err(Halt::Cap(UnknownReason::RoundCap { max_r: caps.max_r.unwrap() }));
            }
            let grew = ex.raise_rounds(next);
            visited.push(ex.bounds());
            observer(ex.bounds(), ex.reach());
            match grew {
                Ok(true) => {}
                Ok(false) => break,
                Err(h) => break 'outer Err(h),
            }
        }
        plateau_start = ex.image_calls();
        let mut quiet = 0;
        let mut restart = false;
        while quiet + 1 < n {
            let next = ex.bounds().d + 1;
            if caps.max_d.is_some_and(|m| next > m) {
                break 'outer Err(Halt::Cap(UnknownReason::DelayCap { max_d: caps.max_d.unwrap() }));
            }
            let grew = ex.raise_delays(next);
            visited.push(ex.bounds());
            observer(ex.bounds(), ex.reach());
            match grew {
                Ok(true) => {
                    restart = true;
                    break;
                }
                Ok(false) => quiet += 1,
                Err(h) => break 'outer Err(h),
            }
        }
        if restart {
            continue;
        }
        let res = closure_test(ex.reach().abstract_states(), abs, p, ThreadCount::Fixed(n))?;
        closure_checks += res.checks;
        break Ok(match res.outcome {
            Closure::Closed => None,
            Closure::Open(cx) => Some(cx),
        });
    };

    let total = ex.image_calls();
    let (verdict, reason, witness, pre, fin) = match outcome {
        Ok(None) => (Verdict::Safe, None, None, plateau_start, total - plateau_start),
        Ok(Some(cx)) => (
            Verdict::Unknown,
            Some(UnknownReason::ClosureFailed(cx)),
            None,
            plateau_start,
            total - plateau_start,
        ),
        Err(Halt::Violation(w)) => (Verdict::Violation, None, Some(*w), total, 0),
        Err(Halt::Cap(r)) => (Verdict::Unknown, Some(r), None, total, 0),
    };
    let b = ex.bounds();
    Ok(VerdictReport {
        verdict,
        reason,
        witness,
        abs_states: ex.reach().abstract_states().clone(),
        r_max: b.r,
        d_max: b.d,
        reached_states: ex.reach().len(),
        image_calls_pre_plateau: pre,
        image_calls_final_plateau: fin,
        closure_checks,
        visited,
        elapsed: ex.elapsed(),
    })
}

/// Outcome of [`finish_rounds`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum FinishRounds {
    Reached { states: Vec<SchedState>, image_calls: u64 },
    /// Path from the start state to a state violating the property, with
    /// the thread of each step.
    Violation { path: Vec<ProgramState>, threads: Vec<ThreadId> },
}

/// All states reachable from `start` without delays and within `r` rounds,
/// explored breadth first. The first popped state whose abstraction
/// violates `prop` aborts the search.
pub fn finish_rounds(p: &Program, abs: &dyn Abstraction, prop: &Property, start: &SchedState, r: u32) -> FinishRounds {
    let n = p.thread_count();
    let mut order: Vec<SchedState> = vec![start.clone()];
    let mut parent: Vec<Option<usize>> = vec![None];
    let mut index: HashMap<(ProgramState, ThreadId), usize> = HashMap::new();
    index.insert((start.prog.clone(), start.finder), 0);
    let mut queue = VecDeque::from([0usize]);
    let mut image_calls = 0;
    while let Some(i) = queue.pop_front() {
        let u = order[i].clone();
        if !prop.holds(&abs.alpha(&u.prog)) {
            let mut chain = vec![i];
            while let Some(pi) = parent[*chain.last().unwrap()] {
                chain.push(pi);
            }
            chain.reverse();
            let path = chain.iter().map(|&c| order[c].prog.clone()).collect();
            let threads = chain[1..].iter().map(|&c| order[c].finder).collect();
            return FinishRounds::Violation { path, threads };
        }
        if !u.schedulable(n, r) {
            continue;
        }
        image_calls += 1;
        for v in image(p, &u) {
            let key = (v.prog.clone(), v.finder);
            if index.contains_key(&key) {
                continue;
            }
            index.insert(key, order.len());
            queue.push_back(order.len());
            order.push(v);
            parent.push(Some(i));
        }
    }
    FinishRounds::Reached {
        states: order,
        image_calls,
    }
}
