//! Reference engines: free-scheduling search, from-scratch bounded search per
//! grid cell, an eager-closure variant of the explorer, and a pure
//! delay-bounded bug finder.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::time::Instant;

use serde::Serialize;

use crate::abstraction::{AbstractState, Abstraction, AbstractionError, Closure, ClosureCounterexample, Property, ThreadCount};
use crate::explore::{druba_observed, Caps, Explorer, GridPoint, Halt, UnknownReason, Verdict, VerdictReport, Witness, ROUND_STRIDE};
use crate::model::{Program, ProgramState, ThreadId};

/// Outcome of a search under free scheduling.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum FreeBfs {
    Reached(BTreeSet<ProgramState>),
    Violation { path: Vec<ProgramState>, threads: Vec<ThreadId> },
    CapExceeded { explored: usize },
}

/// Breadth-first closure under steps of every thread.
pub fn free_bfs(p: &Program, abs: &dyn Abstraction, prop: &Property, state_cap: Option<usize>) -> FreeBfs {
    let mut order: Vec<ProgramState> = Vec::new();
    let mut parent: Vec<Option<(usize, ThreadId)>> = Vec::new();
    let mut index: HashMap<ProgramState, usize> = HashMap::new();
    let mut queue = VecDeque::new();
    for s in p.initial() {
        if !index.contains_key(s) {
            index.insert(s.clone(), order.len());
            queue.push_back(order.len());
            order.push(s.clone());
            parent.push(None);
        }
    }
    while let Some(i) = queue.pop_front() {
        if !prop.holds(&abs.alpha(&order[i])) {
            let mut path = vec![order[i].clone()];
            let mut threads = Vec::new();
            let mut c = i;
            while let Some((pi, t)) = parent[c] {
                path.push(order[pi].clone());
                threads.push(t);
                c = pi;
            }
            path.reverse();
            threads.reverse();
            return FreeBfs::Violation { path, threads };
        }
        for t in p.thread_ids() {
            for next in p.thread_successors(&order[i], t) {
                if index.contains_key(&next) {
                    continue;
                }
                if state_cap.is_some_and(|cap| order.len() >= cap) {
                    return FreeBfs::CapExceeded { explored: order.len() };
                }
                index.insert(next.clone(), order.len());
                queue.push_back(order.len());
                order.push(next);
                parent.push(Some((i, t)));
            }
        }
    }
    FreeBfs::Reached(order.into_iter().collect())
}

/// Program states reachable under Round-Robin scheduling with at most `r`
/// rounds and `d` delays, computed from scratch.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GridCell {
    pub r: u32,
    pub d: u32,
    pub states: BTreeSet<ProgramState>,
    pub image_calls: u64,
}

/// Search over full metadata tuples (state, finder, rounds, delays) with no
/// merging: a step by the next thread is allowed if it keeps the round count
/// within `r`, a skip if it keeps the delay count within `d`.
pub fn naive_cell(p: &Program, r: u32, d: u32) -> GridCell {
    let n = p.thread_count();
    type Key = (ProgramState, usize, u32, u32);
    let mut seen: BTreeSet<Key> = BTreeSet::new();
    let mut queue: VecDeque<Key> = VecDeque::new();
    for s in p.initial() {
        let k = (s.clone(), n - 1, 0, 0);
        if seen.insert(k.clone()) {
            queue.push_back(k);
        }
    }
    let mut image_calls = 0;
    while let Some((s, finder, rounds, delays)) = queue.pop_front() {
        let next = (finder + 1) % n;
        let next_rounds = rounds + u32::from(next == 0);
        if next_rounds <= r {
            image_calls += 1;
            for s2 in p.thread_successors(&s, ThreadId(next)) {
                let k = (s2, next, next_rounds, delays);
                if seen.insert(k.clone()) {
                    queue.push_back(k);
                }
            }
        }
        if delays < d {
            let k = (s, next, next_rounds, delays + 1);
            if seen.insert(k.clone()) {
                queue.push_back(k);
            }
        }
    }
    GridCell {
        r,
        d,
        states: seen.into_iter().map(|k| k.0).collect(),
        image_calls,
    }
}

#[derive(Clone, Debug)]
pub struct Grid {
    pub cells: BTreeMap<GridPoint, GridCell>,
    pub abs_states: BTreeMap<GridPoint, BTreeSet<AbstractState>>,
}

impl Grid {
    pub fn cell(&self, r: u32, d: u32) -> &GridCell {
        &self.cells[&GridPoint { r, d }]
    }

    pub fn abstract_cell(&self, r: u32, d: u32) -> &BTreeSet<AbstractState> {
        &self.abs_states[&GridPoint { r, d }]
    }

    pub fn image_calls(&self) -> u64 {
        self.cells.values().map(|c| c.image_calls).sum()
    }
}

/// Every cell of `[0, r_max] x [0, d_max]`, each computed from scratch.
pub fn naive_grid(p: &Program, abs: &dyn Abstraction, r_max: u32, d_max: u32) -> Grid {
    let mut cells = BTreeMap::new();
    let mut abs_states = BTreeMap::new();
    for r in 0..=r_max {
        for d in 0..=d_max {
            let cell = naive_cell(p, r, d);
            let pt = GridPoint { r, d };
            abs_states.insert(pt, cell.states.iter().map(|s| abs.alpha(s)).collect());
            cells.insert(pt, cell);
        }
    }
    Grid { cells, abs_states }
}

/// Image calls a non-incremental engine spends walking the given bound
/// sequence, recomputing each cell from the initial states.
pub fn naive_walk_image_calls(p: &Program, walk: &[GridPoint]) -> u64 {
    walk.iter().map(|pt| naive_cell(p, pt.r, pt.d).image_calls).sum()
}

fn full_closure(
    p: &Program,
    abs: &dyn Abstraction,
    set: &BTreeSet<AbstractState>,
    witnesses: &BTreeMap<AbstractState, ProgramState>,
    checks: &mut u64,
) -> Result<Closure, AbstractionError> {
    let n = p.thread_count();
    for (a, w) in witnesses {
        for action in p.actions() {
            for t in p.thread_ids() {
                *checks += 1;
                let succ: Vec<AbstractState> = if abs.respects(action.id, t) {
                    p.fire_total(action.id, w, t).iter().map(|s| abs.alpha(s)).collect()
                } else {
                    abs.disrespectful_successors(a, action.id, t, ThreadCount::Fixed(n))?
                };
                if let Some(to) = succ.into_iter().find(|b| !set.contains(b)) {
                    return Ok(Closure::Open(ClosureCounterexample {
                        from: a.clone(),
                        action: action.id,
                        thread: t,
                        to,
                    }));
                }
            }
        }
    }
    Ok(Closure::Closed)
}

/// Same exploration as [`crate::explore::druba`], but after every bound
/// increment the abstract set is tested for closure under all actions:
/// respectful ones through one reached witness per abstract state,
/// disrespectful ones through the enumerators. Reported as the
/// eager-closure baseline.
pub fn ai_style_verify(p: &Program, abs: &dyn Abstraction, prop: &Property, caps: Caps) -> Result<VerdictReport, AbstractionError> {
    let started = Instant::now();
    let n = p.thread_count();
    let mut ex = Explorer::new(p, abs, prop, caps);
    let mut visited = vec![ex.bounds()];
    let mut checks = 0u64;

    let witness_map = |ex: &Explorer<'_>| -> BTreeMap<AbstractState, ProgramState> {
        let mut m = BTreeMap::new();
        for s in ex.reach().program_states() {
            m.entry(abs.alpha(&s)).or_insert(s);
        }
        m
    };

    let finish = |ex: &Explorer<'_>, verdict, reason, witness, checks, visited| VerdictReport {
        verdict,
        reason,
        witness,
        abs_states: ex.reach().abstract_states().clone(),
        r_max: ex.bounds().r,
        d_max: ex.bounds().d,
        reached_states: ex.reach().len(),
        image_calls_pre_plateau: ex.image_calls(),
        image_calls_final_plateau: 0,
        closure_checks: checks,
        visited,
        elapsed: started.elapsed(),
    };
    let halt = |ex: &Explorer<'_>, h: Halt, checks, visited| match h {
        Halt::Violation(w) => finish(ex, Verdict::Violation, None, Some(*w), checks, visited),
        Halt::Cap(r) => finish(ex, Verdict::Unknown, Some(r), None, checks, visited),
    };

    if let Some(h) = ex.halted() {
        let h = h.clone();
        return Ok(halt(&ex, h, checks, visited));
    }
    loop {
        let mut round_grew = true;
        while round_grew {
            let next = ex.bounds().r + ROUND_STRIDE;
            if let Some(m) = caps.max_r.filter(|&m| next > m) {
                return Ok(halt(&ex, Halt::Cap(UnknownReason::RoundCap { max_r: m }), checks, visited));
            }
            match ex.raise_rounds(next) {
                Ok(g) => round_grew = g,
                Err(h) => return Ok(halt(&ex, h, checks, visited)),
            }
            visited.push(ex.bounds());
            let w = witness_map(&ex);
            if full_closure(p, abs, ex.reach().abstract_states(), &w, &mut checks)? == Closure::Closed {
                return Ok(finish(&ex, Verdict::Safe, None, None, checks, visited));
            }
        }
        let mut quiet = 0;
        let mut restart = false;
        while quiet + 1 < n {
            let next = ex.bounds().d + 1;
            if let Some(m) = caps.max_d.filter(|&m| next > m) {
                return Ok(halt(&ex, Halt::Cap(UnknownReason::DelayCap { max_d: m }), checks, visited));
            }
            let grew = match ex.raise_delays(next) {
                Ok(g) => g,
                Err(h) => return Ok(halt(&ex, h, checks, visited)),
            };
            visited.push(ex.bounds());
            let w = witness_map(&ex);
            if full_closure(p, abs, ex.reach().abstract_states(), &w, &mut checks)? == Closure::Closed {
                return Ok(finish(&ex, Verdict::Safe, None, None, checks, visited));
            }
            if grew {
                restart = true;
                break;
            }
            quiet += 1;
        }
        if !restart {
            // Plateau reached and the set is still open: report the first
            // disrespectful counterexample, as the lazy test would.
            let res = crate::abstraction::closure_test(ex.reach().abstract_states(), abs, p, ThreadCount::Fixed(n))?;
            checks += res.checks;
            let (verdict, reason) = match res.outcome {
                Closure::Closed => (Verdict::Safe, None),
                Closure::Open(cx) => (Verdict::Unknown, Some(UnknownReason::ClosureFailed(cx))),
            };
            return Ok(finish(&ex, verdict, reason, None, checks, visited));
        }
    }
}

/// Result of the delay-bounded bug finder.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "outcome", rename_all = "kebab-case")]
pub enum TestOutcome {
    Violation { cell: GridPoint, witness: Witness, cells_explored: usize },
    NoBugWithinBounds { cells_explored: usize },
}

/// Cells of `[0, r_max] x [0, d_max]` by increasing `r + d`; within one
/// diagonal, larger delay bounds first.
pub fn diagonal_order(r_max: u32, d_max: u32) -> Vec<GridPoint> {
    let mut out = Vec::new();
    for k in 0..=(r_max + d_max) {
        for d in (0..=k.min(d_max)).rev() {
            let r = k - d;
            if r <= r_max {
                out.push(GridPoint { r, d });
            }
        }
    }
    out
}

/// Searches the bounded grid for a property violation, with no convergence
/// test. Each cell runs the incremental explorer up to its bounds.
pub fn delay_bounded_test(p: &Program, abs: &dyn Abstraction, prop: &Property, r_max: u32, d_max: u32) -> TestOutcome {
    let cells = diagonal_order(r_max, d_max);
    for (i, cell) in cells.iter().enumerate() {
        let mut ex = Explorer::new(p, abs, prop, Caps::default());
        let res = match ex.halted() {
            Some(h) => Err(h.clone()),
            None => ex.raise_rounds(cell.r).and_then(|_| ex.raise_delays(cell.d)),
        };
        if let Err(Halt::Violation(w)) = res {
            let mut witness = *w;
            witness.found_at = *cell;
            return TestOutcome::Violation {
                cell: *cell,
                witness,
                cells_explored: i + 1,
            };
        }
    }
    TestOutcome::NoBugWithinBounds {
        cells_explored: cells.len(),
    }
}

/// A visited bound pair, the explorer's states there, and the from-scratch cell.
pub type FrontierRow = (GridPoint, BTreeSet<ProgramState>, BTreeSet<ProgramState>);

/// The explorer's reach set at each visited bound pair, projected to
/// program states, next to the from-scratch cell.
pub fn frontier_vs_naive(
    p: &Program,
    abs: &dyn Abstraction,
    prop: &Property,
    caps: Caps,
) -> Result<Vec<FrontierRow>, AbstractionError> {
    let mut out = Vec::new();
    druba_observed(p, abs, prop, caps, &mut |pt, reach| {
        out.push((pt, reach.program_states(), naive_cell(p, pt.r, pt.d).states));
    })?;
    Ok(out)
}
