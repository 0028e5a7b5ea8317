//! Round-Robin schedule accounting: delay cost, rounds, and path validation.

use serde::Serialize;
use thiserror::Error;

use crate::model::{Program, ProgramState, ThreadId};

/// The thread executing each step of a path, in order.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ScheduleFunction {
    pub n: usize,
    pub entries: Vec<ThreadId>,
}

impl ScheduleFunction {
    pub fn new(n: usize, entries: Vec<ThreadId>) -> Self {
        Self { n, entries }
    }

    pub fn from_indices(n: usize, entries: &[usize]) -> Self {
        Self::new(n, entries.iter().copied().map(ThreadId).collect())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct ScheduleCost {
    pub delays: u64,
    pub rounds: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum ScheduleError {
    #[error("schedule over zero threads")]
    NoThreads,
    #[error("entry {position} names thread {thread}, but n = {n}")]
    EntryOutOfRange { position: usize, thread: usize, n: usize },
    #[error("path has {states} states but the schedule has {steps} entries")]
    LengthMismatch { states: usize, steps: usize },
    #[error("schedule is over {schedule} threads, program has {program}")]
    ThreadCountMismatch { schedule: usize, program: usize },
}

/// Delays and rounds taken by a schedule. The modulus is the mathematical
/// one, so every term is in `[0, n)`. The empty schedule costs nothing.
pub fn delay_cost(f: &ScheduleFunction) -> Result<ScheduleCost, ScheduleError> {
    if f.n == 0 {
        return Err(ScheduleError::NoThreads);
    }
    if let Some((position, t)) = f.entries.iter().enumerate().find(|(_, t)| t.0 >= f.n) {
        return Err(ScheduleError::EntryOutOfRange {
            position,
            thread: t.0,
            n: f.n,
        });
    }
    let Some(first) = f.entries.first() else {
        return Ok(ScheduleCost { delays: 0, rounds: 0 });
    };
    let n = f.n as i64;
    let mut delays = first.0 as u64;
    for w in f.entries.windows(2) {
        delays += (w[1].0 as i64 - w[0].0 as i64 - 1).rem_euclid(n) as u64;
    }
    let steps = f.entries.len() as u64;
    Ok(ScheduleCost {
        delays,
        rounds: (steps + delays).div_ceil(f.n as u64),
    })
}

/// Why a path was rejected.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub enum PathDiagnostic {
    NotInitial,
    NotAStep { position: usize, thread: ThreadId },
    TooManyDelays { delays: u64, bound: u64 },
    TooManyRounds { rounds: u64, bound: u64 },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct PathCheck {
    pub cost: ScheduleCost,
    pub diagnostics: Vec<PathDiagnostic>,
}

impl PathCheck {
    pub fn accepted(&self) -> bool {
        self.diagnostics.is_empty()
    }
}

/// Certifies that `path` is an execution of `p` under Round-Robin scheduling
/// with at most `r` rounds and `d` delays, following schedule `f`.
pub fn validate_rr_path(
    p: &Program,
    path: &[ProgramState],
    f: &ScheduleFunction,
    r: u64,
    d: u64,
) -> Result<PathCheck, ScheduleError> {
    if path.len() != f.len() + 1 {
        return Err(ScheduleError::LengthMismatch {
            states: path.len(),
            steps: f.len(),
        });
    }
    if f.n != p.thread_count() {
        return Err(ScheduleError::ThreadCountMismatch {
            schedule: f.n,
            program: p.thread_count(),
        });
    }
    let cost = delay_cost(f)?;
    let mut diagnostics = Vec::new();
    if !p.is_initial(&path[0]) {
        diagnostics.push(PathDiagnostic::NotInitial);
    }
    for (position, (w, &thread)) in path.windows(2).zip(&f.entries).enumerate() {
        if !p.thread_successors(&w[0], thread).contains(&w[1]) {
            diagnostics.push(PathDiagnostic::NotAStep { position, thread });
        }
    }
    if cost.delays > d {
        diagnostics.push(PathDiagnostic::TooManyDelays {
            delays: cost.delays,
            bound: d,
        });
    }
    if cost.rounds > r {
        diagnostics.push(PathDiagnostic::TooManyRounds {
            rounds: cost.rounds,
            bound: r,
        });
    }
    Ok(PathCheck { cost, diagnostics })
}
