//! Machine-readable run reports.

use serde::Serialize;
use serde_json::Value;

use crate::explore::{Verdict, VerdictReport, Witness};
use crate::model::ProgramState;

/// One step of a counterexample. The first step is the initial state and
/// has no thread.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct WitnessStep {
    pub thread: Option<usize>,
    pub state: String,
}

pub fn witness_steps(path: &[ProgramState], threads: &[usize]) -> Vec<WitnessStep> {
    path.iter()
        .enumerate()
        .map(|(i, s)| WitnessStep {
            thread: i.checked_sub(1).map(|j| threads[j]),
            state: s.to_string(),
        })
        .collect()
}

impl From<&Witness> for Vec<WitnessStep> {
    fn from(w: &Witness) -> Self {
        let threads: Vec<usize> = w.schedule.entries.iter().map(|t| t.0).collect();
        witness_steps(&w.path, &threads)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Outcome {
    Safe,
    Violation,
    Unknown,
    NoBugWithinBounds,
}

impl Outcome {
    /// 0 safe, 1 violation, 2 unknown or nothing found.
    pub fn exit_code(self) -> u8 {
        match self {
            Outcome::Safe => 0,
            Outcome::Violation => 1,
            Outcome::Unknown | Outcome::NoBugWithinBounds => 2,
        }
    }
}

impl From<Verdict> for Outcome {
    fn from(v: Verdict) -> Self {
        match v {
            Verdict::Safe => Outcome::Safe,
            Verdict::Violation => Outcome::Violation,
            Verdict::Unknown => Outcome::Unknown,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Report {
    pub model: String,
    pub mode: String,
    pub n: usize,
    pub result: Outcome,
    pub abs_states: usize,
    pub r_max: u32,
    pub d_max: u32,
    pub image_calls_total: u64,
    pub image_calls_final_plateau: u64,
    pub closure_checks: u64,
    pub time_ms: u128,
    pub witness: Vec<WitnessStep>,
    /// Mode-specific extras.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub details: Option<Value>,
}

impl Report {
    pub fn from_verdict(model: &str, mode: &str, n: usize, v: &VerdictReport) -> Self {
        Report {
            model: model.to_string(),
            mode: mode.to_string(),
            n,
            result: v.verdict.into(),
            abs_states: v.abs_states.len(),
            r_max: v.r_max,
            d_max: v.d_max,
            image_calls_total: v.image_calls_total(),
            image_calls_final_plateau: v.image_calls_final_plateau,
            closure_checks: v.closure_checks,
            time_ms: v.elapsed.as_millis(),
            witness: v.witness.as_ref().map(Vec::from).unwrap_or_default(),
            details: Some(serde_json::json!({
                "reason": v.reason,
                "abstract_states": v.abs_states.iter().map(|a| a.to_string()).collect::<Vec<_>>(),
                "reached_states": v.reached_states,
            })),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// JSON with `time_ms` zeroed, for comparing runs.
    pub fn to_json_untimed(&self) -> String {
        let mut r = self.clone();
        r.time_ms = 0;
        r.to_json()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn witness_steps_pair_threads_with_targets() {
        let s0 = ProgramState::new(vec![0], vec![vec![0]]);
        let s1 = ProgramState::new(vec![1], vec![vec![0]]);
        let steps = witness_steps(&[s0, s1], &[0]);
        assert_eq!(steps[0].thread, None);
        assert_eq!(steps[1].thread, Some(0));
    }

    #[test]
    fn exit_codes() {
        assert_eq!(Outcome::Safe.exit_code(), 0);
        assert_eq!(Outcome::Violation.exit_code(), 1);
        assert_eq!(Outcome::Unknown.exit_code(), 2);
        assert_eq!(Outcome::NoBugWithinBounds.exit_code(), 2);
    }

    #[test]
    fn field_names_are_stable() {
        let r = Report {
            model: "m".into(),
            mode: "verify".into(),
            n: 2,
            result: Outcome::Safe,
            abs_states: 1,
            r_max: 2,
            d_max: 1,
            image_calls_total: 5,
            image_calls_final_plateau: 1,
            closure_checks: 0,
            time_ms: 3,
            witness: Vec::new(),
            details: None,
        };
        let v: Value = serde_json::from_str(&r.to_json()).unwrap();
        let keys: Vec<&str> = v.as_object().unwrap().keys().map(String::as_str).collect();
        for k in [
            "model", "mode", "n", "result", "abs_states", "r_max", "d_max", "image_calls_total",
            "image_calls_final_plateau", "closure_checks", "time_ms", "witness",
        ] {
            assert!(keys.contains(&k), "{k}");
        }
    }
}
