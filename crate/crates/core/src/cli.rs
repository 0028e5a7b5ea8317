//! Run configuration and dispatch behind the `rrcheck` binary.

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde_json::json;
use thiserror::Error;

use crate::abstraction::{alpha_image, Abstraction, AbstractionError, Exhaustive, Identity, Property};
use crate::async_format::{parse_async_model, AsyncAbstraction, AsyncError};
use crate::baselines::{ai_style_verify, delay_bounded_test, free_bfs, naive_walk_image_calls, FreeBfs, TestOutcome};
use crate::cpds::{parse_cpds, CpdsError, TopOfStack};
use crate::explore::{druba, Caps};
use crate::model::Program;
use crate::models::example2::{example2_family, shared_abstraction};
use crate::models::example3::example3_model;
use crate::models::program_p::{assertion, program_p_alpha, program_p_model, Variant};
use crate::models::ticket_lock::{mutual_exclusion, ticket_lock_alpha, ticket_lock_double_increment, ticket_lock_model};
use crate::models::{ModelError, BUILTIN_NAMES};
use crate::report::{witness_steps, Outcome, Report};
use crate::unbounded::{verify_unbounded, UnboundedError};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ModelSource {
    Builtin(String),
    File(PathBuf),
}

impl ModelSource {
    /// Built-in names win over paths.
    pub fn resolve(arg: &str) -> Self {
        if BUILTIN_NAMES.contains(&arg) {
            ModelSource::Builtin(arg.to_string())
        } else {
            ModelSource::File(PathBuf::from(arg))
        }
    }

    fn label(&self) -> String {
        match self {
            ModelSource::Builtin(n) => n.clone(),
            ModelSource::File(p) => p.display().to_string(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Verify,
    Test,
    VerifyUnbounded,
    Compare,
    Oracle,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Verify => "verify",
            Mode::Test => "test",
            Mode::VerifyUnbounded => "verify-unbounded",
            Mode::Compare => "compare",
            Mode::Oracle => "oracle",
        }
    }
}

#[derive(Clone, Debug)]
pub struct RunConfig {
    pub source: ModelSource,
    pub mode: Mode,
    /// Thread count for built-in families; the starting count for
    /// `verify-unbounded`.
    pub n: Option<usize>,
    pub abstraction: Option<String>,
    /// `shared=<g>`: the shared value must never equal `g`.
    pub error: Option<String>,
    pub caps: Caps,
    pub max_n: usize,
    pub out: Option<PathBuf>,
}

impl RunConfig {
    pub fn new(source: ModelSource, mode: Mode) -> Self {
        RunConfig {
            source,
            mode,
            n: None,
            abstraction: None,
            error: None,
            caps: Caps::default(),
            max_n: 6,
            out: None,
        }
    }
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Async { path: PathBuf, source: AsyncError },
    #[error("{path}: {source}")]
    Cpds { path: PathBuf, source: CpdsError },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Abstraction(#[from] AbstractionError),
    #[error(transparent)]
    Unbounded(#[from] UnboundedError),
    #[error("{0}")]
    Config(String),
}

/// A model ready to run.
pub struct Loaded {
    pub program: Program,
    pub abs: Box<dyn Abstraction>,
    pub prop: Property,
}

fn error_property(arg: Option<&str>) -> Result<Option<Property>, CliError> {
    let Some(arg) = arg else { return Ok(None) };
    let value = arg
        .strip_prefix("shared=")
        .and_then(|v| v.trim().parse::<i64>().ok())
        .ok_or_else(|| CliError::Config(format!("--error expects `shared=<value>`, got `{arg}`")))?;
    Ok(Some(Property::shared_not(value)))
}

fn finite_abstraction(name: Option<&str>, default: AsyncAbstraction, p: &Program) -> Result<Box<dyn Abstraction>, CliError> {
    let choice = name.map(str::parse::<AsyncAbstraction>).transpose().map_err(CliError::Config)?.unwrap_or(default);
    Ok(match choice {
        AsyncAbstraction::Identity => Box::new(Identity),
        AsyncAbstraction::SharedOnly => {
            Box::new(Exhaustive::shared_only(p).ok_or_else(|| CliError::Config("model is not finite".into()))?)
        }
    })
}

fn no_error_flag(cfg: &RunConfig, model: &str) -> Result<(), CliError> {
    match cfg.error {
        Some(_) => Err(CliError::Config(format!("`{model}` has a fixed property; drop --error"))),
        None => Ok(()),
    }
}

fn load_builtin(name: &str, n: usize, cfg: &RunConfig) -> Result<Loaded, CliError> {
    let abs_name = cfg.abstraction.as_deref();
    match name {
        "example2" => {
            let program = example2_family(n)?;
            let abs: Box<dyn Abstraction> = match abs_name {
                None | Some("shared-only") | Some("shared") => Box::new(shared_abstraction(&program)),
                other => finite_abstraction(other, AsyncAbstraction::SharedOnly, &program)?,
            };
            let prop = error_property(cfg.error.as_deref())?.unwrap_or_else(Property::always);
            Ok(Loaded { program, abs, prop })
        }
        "example3" => {
            let program = example3_model(n)?;
            let abs = finite_abstraction(abs_name, AsyncAbstraction::Identity, &program)?;
            let prop = error_property(cfg.error.as_deref())?.unwrap_or_else(Property::always);
            Ok(Loaded { program, abs, prop })
        }
        "program-p" => {
            no_error_flag(cfg, name)?;
            let variant: Variant = abs_name.unwrap_or("alpha2").parse()?;
            Ok(Loaded {
                program: program_p_model(n)?,
                abs: Box::new(program_p_alpha(variant)),
                prop: assertion(),
            })
        }
        "ticket-lock" | "ticket-lock-double-inc" => {
            no_error_flag(cfg, name)?;
            if let Some(a) = abs_name.filter(|a| *a != "predicates") {
                return Err(ModelError::UnknownVariant(a.to_string()).into());
            }
            let program = if name == "ticket-lock" { ticket_lock_model(n)? } else { ticket_lock_double_increment(n)? };
            Ok(Loaded {
                program,
                abs: Box::new(ticket_lock_alpha()),
                prop: mutual_exclusion(),
            })
        }
        other => Err(ModelError::UnknownModel(other.to_string()).into()),
    }
}

fn default_n(name: &str) -> usize {
    if name == "example2" {
        3
    } else {
        2
    }
}

fn load_file(path: &Path, cfg: &RunConfig) -> Result<Loaded, CliError> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Io { path: path.to_path_buf(), source })?;
    let header = crate::cpds::token_lines(&text).next().map(|(_, t)| t.join(" "));
    if header.as_deref() == Some("cpds") {
        let sys = parse_cpds(&text).map_err(|source| CliError::Cpds { path: path.to_path_buf(), source })?;
        if let Some(a) = cfg.abstraction.as_deref().filter(|a| *a != "top-of-stack") {
            return Err(CliError::Config(format!("pushdown models support only top-of-stack, not `{a}`")));
        }
        let prop = error_property(cfg.error.as_deref())?.unwrap_or_else(Property::always);
        return Ok(Loaded {
            abs: Box::new(TopOfStack::new(&sys)),
            program: sys.program,
            prop,
        });
    }
    let model = parse_async_model(&text).map_err(|source| CliError::Async { path: path.to_path_buf(), source })?;
    let prop = match error_property(cfg.error.as_deref())? {
        Some(p) => p,
        None => model.property(),
    };
    let abs = finite_abstraction(cfg.abstraction.as_deref(), AsyncAbstraction::Identity, &model.program)?;
    Ok(Loaded {
        program: model.program,
        abs,
        prop,
    })
}

/// Loads the configured model at thread count `n` (ignored for files).
pub fn load(cfg: &RunConfig, n: Option<usize>) -> Result<Loaded, CliError> {
    match &cfg.source {
        ModelSource::Builtin(name) => load_builtin(name, n.unwrap_or_else(|| default_n(name)), cfg),
        ModelSource::File(path) => {
            if n.is_some() {
                return Err(CliError::Config("--n applies only to built-in models".into()));
            }
            load_file(path, cfg)
        }
    }
}

/// Runs the configured mode, writes the report to `cfg.out` if set, and
/// returns it.
pub fn run(cfg: &RunConfig) -> Result<Report, CliError> {
    let label = cfg.source.label();
    let mode = cfg.mode.name();
    let report = match cfg.mode {
        Mode::Verify => {
            let m = load(cfg, cfg.n)?;
            let v = druba(&m.program, m.abs.as_ref(), &m.prop, cfg.caps)?;
            Report::from_verdict(&label, mode, m.program.thread_count(), &v)
        }
        Mode::Compare => {
            let m = load(cfg, cfg.n)?;
            let v = druba(&m.program, m.abs.as_ref(), &m.prop, cfg.caps)?;
            let naive = naive_walk_image_calls(&m.program, &v.visited);
            let eager = ai_style_verify(&m.program, m.abs.as_ref(), &m.prop, cfg.caps)?;
            let mut r = Report::from_verdict(&label, mode, m.program.thread_count(), &v);
            r.details = Some(json!({
                "frontier": {
                    "result": Outcome::from(v.verdict),
                    "image_calls": v.image_calls_total(),
                    "image_calls_final_plateau": v.image_calls_final_plateau,
                    "closure_checks": v.closure_checks,
                    "abs_states": v.abs_states.len(),
                },
                "naive": { "image_calls": naive },
                "eager_closure_baseline": {
                    "result": Outcome::from(eager.verdict),
                    "image_calls": eager.image_calls_total(),
                    "closure_checks": eager.closure_checks,
                    "abs_states": eager.abs_states.len(),
                },
            }));
            r
        }
        Mode::Test => {
            let m = load(cfg, cfg.n)?;
            let started = Instant::now();
            let (r_max, d_max) = (cfg.caps.max_r.unwrap_or(4), cfg.caps.max_d.unwrap_or(4));
            let outcome = delay_bounded_test(&m.program, m.abs.as_ref(), &m.prop, r_max, d_max);
            let (result, witness, cell, cells) = match &outcome {
                TestOutcome::Violation { cell, witness, cells_explored } => {
                    (Outcome::Violation, witness.into(), Some(*cell), *cells_explored)
                }
                TestOutcome::NoBugWithinBounds { cells_explored } => (Outcome::NoBugWithinBounds, Vec::new(), None, *cells_explored),
            };
            Report {
                model: label,
                mode: mode.into(),
                n: m.program.thread_count(),
                result,
                abs_states: 0,
                r_max: cell.map_or(r_max, |c| c.r),
                d_max: cell.map_or(d_max, |c| c.d),
                image_calls_total: 0,
                image_calls_final_plateau: 0,
                closure_checks: 0,
                time_ms: started.elapsed().as_millis(),
                witness,
                details: Some(json!({ "cells_explored": cells })),
            }
        }
        Mode::Oracle => {
            let m = load(cfg, cfg.n)?;
            let started = Instant::now();
            let cap = cfg.caps.max_states.unwrap_or(1_000_000);
            let (result, abs_states, witness, explored) = match free_bfs(&m.program, m.abs.as_ref(), &m.prop, Some(cap)) {
                FreeBfs::Reached(states) => (Outcome::Safe, alpha_image(m.abs.as_ref(), &states).len(), Vec::new(), states.len()),
                FreeBfs::Violation { path, threads } => {
                    let ts: Vec<usize> = threads.iter().map(|t| t.0).collect();
                    (Outcome::Violation, 0, witness_steps(&path, &ts), path.len())
                }
                FreeBfs::CapExceeded { explored } => (Outcome::Unknown, 0, Vec::new(), explored),
            };
            Report {
                model: label,
                mode: mode.into(),
                n: m.program.thread_count(),
                result,
                abs_states,
                r_max: 0,
                d_max: 0,
                image_calls_total: 0,
                image_calls_final_plateau: 0,
                closure_checks: 0,
                time_ms: started.elapsed().as_millis(),
                witness,
                details: Some(json!({ "explored_states": explored })),
            }
        }
        Mode::VerifyUnbounded => {
            let ModelSource::Builtin(name) = &cfg.source else {
                return Err(CliError::Config("verify-unbounded needs a built-in model family".into()));
            };
            let start = cfg.n.unwrap_or_else(|| default_n(name));
            let started = Instant::now();
            let family = |n: usize| -> Result<(Program, Box<dyn Abstraction>), ModelError> {
                match load_builtin(name, n, cfg) {
                    Ok(m) => Ok((m.program, m.abs)),
                    Err(CliError::Model(e)) => Err(e),
                    Err(e) => Err(ModelError::UnknownVariant(e.to_string())),
                }
            };
            let prop = load_builtin(name, start, cfg)?.prop;
            let u = verify_unbounded(&family, &prop, start, cfg.max_n.max(start), cfg.caps)?;
            let last = u.last().expect("at least one thread count runs");
            let mut r = Report::from_verdict(&label, mode, last.n, &last.report);
            r.result = u.verdict.into();
            r.abs_states = u.abs_states.len();
            r.closure_checks = u.closure_checks + u.per_n.iter().map(|p| p.report.closure_checks).sum::<u64>();
            r.image_calls_total = u.per_n.iter().map(|p| p.report.image_calls_total()).sum();
            r.image_calls_final_plateau = u.per_n.iter().map(|p| p.report.image_calls_final_plateau).sum();
            r.time_ms = started.elapsed().as_millis();
            r.details = Some(json!({
                "reason": u.reason,
                "n_plateau_at": u.n_plateau_at,
                "abstract_states": u.abs_states.iter().map(|a| a.to_string()).collect::<Vec<_>>(),
                "per_n": u.per_n.iter().map(|p| json!({
                    "n": p.n,
                    "result": Outcome::from(p.report.verdict),
                    "abs_states": p.report.abs_states.len(),
                    "r_max": p.report.r_max,
                    "d_max": p.report.d_max,
                    "image_calls_total": p.report.image_calls_total(),
                })).collect::<Vec<_>>(),
            }));
            r
        }
    };
    if let Some(path) = &cfg.out {
        std::fs::write(path, report.to_json() + "\n").map_err(|source| CliError::Io { path: path.clone(), source })?;
    }
    Ok(report)
}
