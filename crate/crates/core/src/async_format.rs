//! Finite asynchronous programs in a line-based text format:
//!
//! ```text
//! async
//! shared <k>
//! init <g0>
//! thread <name> copies <c>
//!   locals <m>
//!   linit <l0>
//!   rule <g> <l> -> <g'> <l'>
//! end
//! [error shared <g>]
//! ```
//!
//! Shared values range over `0..k`, locals over `0..m`. Every rule is one
//! action, shared by all copies of its thread block.

use std::str::FromStr;

use thiserror::Error;

use crate::abstraction::{Abstraction, Exhaustive, Identity, Property};
use crate::cpds::{int, token_lines, CpdsError};
use crate::model::{validate_program, LocalDomain, Program, ProgramBuilder, ProgramState, RuleEndpoint, ValidationReport, ValueDomain};

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum AsyncError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("invalid program:\n{0}")]
    Invalid(ValidationReport),
}

impl From<CpdsError> for AsyncError {
    fn from(e: CpdsError) -> Self {
        match e {
            CpdsError::Syntax { line, message } => AsyncError::Syntax { line, message },
            CpdsError::Invalid(r) => AsyncError::Invalid(r),
        }
    }
}

/// A parsed program and its optional error clause.
#[derive(Clone, Debug)]
pub struct AsyncModel {
    pub program: Program,
    pub error_shared: Option<i64>,
}

impl AsyncModel {
    /// Holds unless the shared value equals the error value.
    pub fn property(&self) -> Property {
        match self.error_shared {
            Some(g) => Property::shared_not(g),
            None => Property::always(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AsyncAbstraction {
    Identity,
    SharedOnly,
}

impl FromStr for AsyncAbstraction {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "identity" => Ok(Self::Identity),
            "shared-only" | "shared" => Ok(Self::SharedOnly),
            other => Err(format!("unknown abstraction `{other}` (expected identity or shared-only)")),
        }
    }
}

impl AsyncAbstraction {
    pub fn build(self, p: &Program) -> Box<dyn Abstraction> {
        match self {
            Self::Identity => Box::new(Identity),
            Self::SharedOnly => Box::new(Exhaustive::shared_only(p).expect("async programs are finite")),
        }
    }
}

fn syntax(line: usize, message: impl Into<String>) -> AsyncError {
    AsyncError::Syntax {
        line,
        message: message.into(),
    }
}

struct Block {
    name: String,
    copies: usize,
    locals: Option<i64>,
    linit: Option<i64>,
    rules: Vec<[i64; 4]>,
    line: usize,
}

pub fn parse_async_model(text: &str) -> Result<AsyncModel, AsyncError> {
    let mut lines = token_lines(text);
    match lines.next() {
        Some((_, t)) if t == ["async"] => {}
        Some((line, _)) => return Err(syntax(line, "expected header `async`")),
        None => return Err(syntax(1, "empty input")),
    }
    let mut shared = None;
    let mut init = None;
    let mut error_shared = None;
    let mut blocks: Vec<Block> = Vec::new();
    let mut open: Option<Block> = None;
    let mut last_line = 1;
    for (line, t) in lines {
        last_line = line;
        match (open.as_mut(), t[0]) {
            (None, "shared") if t.len() == 2 => shared = Some(int(line, t[1])?),
            (None, "init") if t.len() == 2 => init = Some(int(line, t[1])?),
            (None, "error") if t.len() == 3 && t[1] == "shared" => error_shared = Some(int(line, t[2])?),
            (None, "thread") => {
                if t.len() != 4 || t[2] != "copies" {
                    return Err(syntax(line, "expected `thread <name> copies <c>`"));
                }
                let copies = int(line, t[3])?;
                if copies < 1 {
                    return Err(syntax(line, "copies must be at least 1"));
                }
                open = Some(Block {
                    name: t[1].to_string(),
                    copies: copies as usize,
                    locals: None,
                    linit: None,
                    rules: Vec::new(),
                    line,
                });
            }
            (Some(b), "locals") if t.len() == 2 => b.locals = Some(int(line, t[1])?),
            (Some(b), "linit") if t.len() == 2 => b.linit = Some(int(line, t[1])?),
            (Some(b), "rule") => {
                if t.len() != 6 || t[3] != "->" {
                    return Err(syntax(line, "expected `rule <g> <l> -> <g'> <l'>`"));
                }
                b.rules.push([int(line, t[1])?, int(line, t[2])?, int(line, t[4])?, int(line, t[5])?]);
            }
            (Some(_), "end") if t.len() == 1 => blocks.push(open.take().expect("open block")),
            (_, other) => return Err(syntax(line, format!("unexpected `{other}`"))),
        }
    }
    if let Some(b) = open {
        return Err(syntax(b.line, format!("thread `{}` is missing `end`", b.name)));
    }
    let shared = shared.ok_or_else(|| syntax(last_line, "missing `shared`"))?;
    let init = init.ok_or_else(|| syntax(last_line, "missing `init`"))?;
    if blocks.is_empty() {
        return Err(syntax(last_line, "no thread blocks"));
    }

    let mut pb = ProgramBuilder::new("async", vec![ValueDomain::Finite { size: shared }]);
    let mut init_locals = Vec::new();
    for b in &blocks {
        let locals = b.locals.ok_or_else(|| syntax(b.line, format!("thread `{}` has no `locals`", b.name)))?;
        let linit = b.linit.ok_or_else(|| syntax(b.line, format!("thread `{}` has no `linit`", b.name)))?;
        let ids: Vec<_> = b
            .rules
            .iter()
            .map(|&[g, l, g2, l2]| {
                pb.action_with_endpoints(
                    format!("{}: {g} {l} -> {g2} {l2}", b.name),
                    move |gs, ls| {
                        if gs[0] == g && ls[0] == l {
                            vec![(vec![g2], vec![l2])]
                        } else {
                            Vec::new()
                        }
                    },
                    vec![RuleEndpoint {
                        from_shared: vec![g],
                        from_local: vec![l],
                        to_shared: vec![g2],
                        to_local: vec![l2],
                    }],
                )
            })
            .collect();
        for c in 0..b.copies {
            let name = if b.copies == 1 { b.name.clone() } else { format!("{}#{c}", b.name) };
            pb.thread(name, b.name.clone(), ids.clone(), LocalDomain::finite(locals));
            init_locals.push(vec![linit]);
        }
    }
    pb.initial(ProgramState::new(vec![init], init_locals));
    let program = pb.build();
    let report = validate_program(&program);
    if !report.is_ok() {
        return Err(AsyncError::Invalid(report));
    }
    if let Some(g) = error_shared {
        if !(0..shared).contains(&g) {
            return Err(syntax(last_line, format!("error value {g} outside shared domain 0..{shared}")));
        }
    }
    Ok(AsyncModel { program, error_shared })
}
