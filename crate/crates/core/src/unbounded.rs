//! Verification for every thread count: fixed-`n` runs for growing `n`
//! until the abstract reach set repeats, then a closure check whose
//! enumerators hold for any number of threads.

use std::collections::BTreeSet;

use serde::Serialize;
use thiserror::Error;

use crate::abstraction::{closure_test, AbstractState, Abstraction, AbstractionError, Closure, Property, ThreadCount};
use crate::baselines::naive_cell;
use crate::explore::{druba, Caps, UnknownReason, Verdict, VerdictReport};
use crate::model::Program;
use crate::models::ModelError;

/// Builds the program and abstraction for a thread count.
pub type Family<'f> = dyn Fn(usize) -> Result<(Program, Box<dyn Abstraction>), ModelError> + 'f;

#[derive(Debug, Error)]
pub enum UnboundedError {
    #[error("abstract values have {first} components at n = {first_n} but {other} at n = {other_n}")]
    NonUniformCodomain {
        first_n: usize,
        first: usize,
        other_n: usize,
        other: usize,
    },
    #[error("thread range {start}..={max} is empty")]
    EmptyRange { start: usize, max: usize },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Abstraction(#[from] AbstractionError),
}

#[derive(Clone, Debug, Serialize)]
pub struct PerN {
    pub n: usize,
    pub report: VerdictReport,
}

#[derive(Clone, Debug, Serialize)]
pub struct UnboundedVerdict {
    pub verdict: Verdict,
    pub reason: Option<UnknownReason>,
    /// Thread count whose abstract reach set equals the previous one.
    pub n_plateau_at: Option<usize>,
    pub abs_states: BTreeSet<AbstractState>,
    pub closure_checks: u64,
    pub per_n: Vec<PerN>,
}

impl UnboundedVerdict {
    /// The last per-`n` report.
    pub fn last(&self) -> Option<&PerN> {
        self.per_n.last()
    }
}

/// Runs fixed-`n` verification for `n = n_start, n_start + 1, ..., n_max`.
/// A violation or an unknown result at any `n` decides the family. Once two
/// consecutive thread counts give the same abstract set, that set is tested
/// for closure with parametric enumerators.
pub fn verify_unbounded(
    family: &Family<'_>,
    prop: &Property,
    n_start: usize,
    n_max: usize,
    caps: Caps,
) -> Result<UnboundedVerdict, UnboundedError> {
    if n_start > n_max {
        return Err(UnboundedError::EmptyRange { start: n_start, max: n_max });
    }
    let mut per_n: Vec<PerN> = Vec::new();
    let mut width: Option<(usize, usize)> = None;
    let mut previous: Option<BTreeSet<AbstractState>> = None;
    for n in n_start..=n_max {
        let (program, abs) = family(n)?;
        let w = program.initial().first().map_or(0, |s| abs.alpha(s).0.len());
        match width {
            None => width = Some((n, w)),
            Some((first_n, first)) if first != w => {
                return Err(UnboundedError::NonUniformCodomain { first_n, first, other_n: n, other: w });
            }
            Some(_) => {}
        }
        let report = druba(&program, abs.as_ref(), prop, caps)?;
        let verdict = report.verdict;
        let reason = report.reason.clone();
        let states = report.abs_states.clone();
        per_n.push(PerN { n, report });
        if verdict != Verdict::Safe {
            return Ok(UnboundedVerdict {
                verdict,
                reason,
                n_plateau_at: None,
                abs_states: states,
                closure_checks: 0,
                per_n,
            });
        }
        if previous.as_ref() == Some(&states) {
            let res = closure_test(&states, abs.as_ref(), &program, ThreadCount::Parametric)?;
            let (verdict, reason) = match res.outcome {
                Closure::Closed => (Verdict::Safe, None),
                Closure::Open(cx) => (Verdict::Unknown, Some(UnknownReason::ClosureFailed(cx))),
            };
            return Ok(UnboundedVerdict {
                verdict,
                reason,
                n_plateau_at: Some(n),
                abs_states: states,
                closure_checks: res.checks,
                per_n,
            });
        }
        previous = Some(states);
    }
    Ok(UnboundedVerdict {
        verdict: Verdict::Unknown,
        reason: Some(UnknownReason::NotConverged),
        n_plateau_at: None,
        abs_states: previous.unwrap_or_default(),
        closure_checks: 0,
        per_n,
    })
}

/// A shared valuation reachable with `n` threads but not with `n + 1`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NonMonotonicity {
    pub shared: Vec<i64>,
}

/// Compares the shared projections of the `(r, d)` cells for `n` and `n + 1`
/// threads. Returns the least shared valuation missing from the larger
/// system, if any.
pub fn check_rr_nonmonotonicity(
    family: &dyn Fn(usize) -> Result<Program, ModelError>,
    n: usize,
    r: u32,
    d: u32,
) -> Result<Option<NonMonotonicity>, ModelError> {
    let project = |p: &Program| -> BTreeSet<Vec<i64>> {
        naive_cell(p, r, d).states.into_iter().map(|s| s.shared).collect()
    };
    let small = project(&family(n)?);
    let large = project(&family(n + 1)?);
    Ok(small.difference(&large).next().map(|s| NonMonotonicity { shared: s.clone() }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::abstraction::Identity;
    use crate::models::example2::{example2_family, shared_abstraction};
    use crate::models::example3::{example3_model, S};

    #[test]
    fn example3_loses_a_state_with_more_threads() {
        let w = check_rr_nonmonotonicity(&example3_model, 1, 3, 0).unwrap().unwrap();
        assert_eq!(w.shared[S], 1);
    }

    #[test]
    fn example2_grows_with_copies() {
        for r in 0..3 {
            for d in 0..3 {
                assert_eq!(check_rr_nonmonotonicity(&example2_family, 3, r, d).unwrap(), None);
            }
        }
    }

    #[test]
    fn identical_programs_are_contained() {
        let same = |_: usize| example3_model(2);
        assert_eq!(check_rr_nonmonotonicity(&same, 1, 4, 2).unwrap(), None);
    }

    #[test]
    fn growing_codomain_is_rejected() {
        let fam = |n: usize| -> Result<(Program, Box<dyn Abstraction>), ModelError> {
            Ok((example3_model(n)?, Box::new(Identity)))
        };
        let err = verify_unbounded(&fam, &Property::always(), 1, 3, Caps::default()).unwrap_err();
        assert!(matches!(err, UnboundedError::NonUniformCodomain { .. }));
    }

    #[test]
    fn example2_family_plateaus_on_shared_values() {
        let fam = |n: usize| -> Result<(Program, Box<dyn Abstraction>), ModelError> {
            let p = example2_family(n)?;
            let a = shared_abstraction(&p);
            Ok((p, Box::new(a)))
        };
        let v = verify_unbounded(&fam, &Property::always(), 3, 6, Caps::default()).unwrap();
        assert_eq!(v.verdict, Verdict::Safe);
        assert_eq!(v.n_plateau_at, Some(4));
        assert_eq!(v.abs_states.len(), 3);
    }

    #[test]
    fn empty_range_is_an_error() {
        let fam = |n: usize| -> Result<(Program, Box<dyn Abstraction>), ModelError> {
            Ok((example3_model(n)?, Box::new(Identity)))
        };
        assert!(matches!(
            verify_unbounded(&fam, &Property::always(), 4, 2, Caps::default()),
            Err(UnboundedError::EmptyRange { .. })
        ));
    }
}
