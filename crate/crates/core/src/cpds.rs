//! Concurrent pushdown systems: a finite shared state plus one stack per
//! thread, with rules that overwrite, push onto, or pop the top symbol.
//!
//! Text format, one directive per line, `#` starts a comment:
//!
//! ```text
//! cpds
//! shared <k>
//! init <g0>
//! thread <name> copies <c>
//!   alphabet <m>
//!   stack <symbols, top first>
//!   rule <g> <sym> -> <g'> over <sym'>
//!   rule <g> <sym> -> <g'> push <new top> <second>
//!   rule <g> <sym> -> <g'> pop
//! end
//! ```
//!
//! The abstraction keeps the shared state and each thread's top symbol
//! ([`EMPTY`] for an empty stack). Overwrites and pushes respect it; pops
//! expose an unknown symbol and do not.

use std::collections::BTreeSet;

use thiserror::Error;

use crate::abstraction::{AbstractState, Abstraction, AbstractionError, RespectScope, ThreadCount};
use crate::model::{validate_program, ActionId, LocalDomain, Program, ProgramBuilder, ProgramState, RuleEndpoint, ThreadId, ValidationReport, ValueDomain};

/// Abstract marker for an empty stack.
pub const EMPTY: i64 = -1;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RuleKind {
    Overwrite(i64),
    /// New top first.
    Push(i64, i64),
    Pop,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CpdsRule {
    pub from_shared: i64,
    pub from_top: i64,
    pub to_shared: i64,
    pub kind: RuleKind,
}

impl CpdsRule {
    /// `(g, stack)` successors; empty when the rule does not match.
    pub fn apply(&self, g: i64, stack: &[i64]) -> Option<(i64, Vec<i64>)> {
        let (&top, rest) = stack.split_first()?;
        if g != self.from_shared || top != self.from_top {
            return None;
        }
        let mut out = match self.kind {
            RuleKind::Overwrite(x) => vec![x],
            RuleKind::Push(a, b) => vec![a, b],
            RuleKind::Pop => Vec::new(),
        };
        out.extend_from_slice(rest);
        Some((self.to_shared, out))
    }

    fn endpoint(&self) -> RuleEndpoint {
        RuleEndpoint {
            from_shared: vec![self.from_shared],
            from_local: vec![self.from_top],
            to_shared: vec![self.to_shared],
            to_local: match self.kind {
                RuleKind::Overwrite(x) => vec![x],
                RuleKind::Push(a, b) => vec![a, b],
                RuleKind::Pop => Vec::new(),
            },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum CpdsError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("invalid system:\n{0}")]
    Invalid(ValidationReport),
}

/// A parsed system: the program, its rules indexed by action, and each
/// thread's alphabet size.
#[derive(Clone, Debug)]
pub struct Cpds {
    pub program: Program,
    pub rules: Vec<CpdsRule>,
    pub alphabets: Vec<i64>,
    pub shared_size: i64,
}

/// Significant lines as (1-based line number, tokens).
pub(crate) fn token_lines(text: &str) -> impl Iterator<Item = (usize, Vec<&str>)> {
    text.lines().enumerate().filter_map(|(i, line)| {
        let body = line.split('#').next().unwrap_or("");
        let tokens: Vec<&str> = body.split_whitespace().collect();
        (!tokens.is_empty()).then_some((i + 1, tokens))
    })
}

pub(crate) fn int(line: usize, tok: &str) -> Result<i64, CpdsError> {
    tok.parse().map_err(|_| CpdsError::Syntax {
        line,
        message: format!("expected an integer, found `{tok}`"),
    })
}

fn syntax(line: usize, message: impl Into<String>) -> CpdsError {
    CpdsError::Syntax {
        line,
        message: message.into(),
    }
}

struct ThreadDecl {
    name: String,
    copies: usize,
    alphabet: Option<i64>,
    stack: Vec<i64>,
    rules: Vec<CpdsRule>,
}

fn parse_rule(line: usize, t: &[&str]) -> Result<CpdsRule, CpdsError> {
    if t.len() < 6 || t[3] != "->" {
        return Err(syntax(line, "expected `rule <g> <sym> -> <g'> <over|push|pop> ...`"));
    }
    let (from_shared, from_top, to_shared) = (int(line, t[1])?, int(line, t[2])?, int(line, t[4])?);
    let kind = match (t[5], &t[6..]) {
        ("over", [x]) => RuleKind::Overwrite(int(line, x)?),
        ("push", [a, b]) => RuleKind::Push(int(line, a)?, int(line, b)?),
        ("pop", []) => RuleKind::Pop,
        (k, _) => return Err(syntax(line, format!("malformed `{k}` rule"))),
    };
    Ok(CpdsRule {
        from_shared,
        from_top,
        to_shared,
        kind,
    })
}

pub fn parse_cpds(text: &str) -> Result<Cpds, CpdsError> {
    let mut lines = token_lines(text);
    match lines.next() {
        Some((_, t)) if t == ["cpds"] => {}
        Some((line, _)) => return Err(syntax(line, "expected header `cpds`")),
        None => return Err(syntax(1, "empty input")),
    }
    let mut shared: Option<i64> = None;
    let mut init: Option<i64> = None;
    let mut threads: Vec<ThreadDecl> = Vec::new();
    let mut open: Option<ThreadDecl> = None;
    let mut last_line = 1;
    for (line, t) in lines {
        last_line = line;
        match (open.as_mut(), t[0]) {
            (None, "shared") if t.len() == 2 => shared = Some(int(line, t[1])?),
            (None, "init") if t.len() == 2 => init = Some(int(line, t[1])?),
            (None, "thread") => {
                if t.len() != 4 || t[2] != "copies" {
                    return Err(syntax(line, "expected `thread <name> copies <c>`"));
                }
                let copies = int(line, t[3])?;
                if copies < 1 {
                    return Err(syntax(line, "copies must be at least 1"));
                }
                open = Some(ThreadDecl {
                    name: t[1].to_string(),
                    copies: copies as usize,
                    alphabet: None,
                    stack: Vec::new(),
                    rules: Vec::new(),
                });
            }
            (Some(d), "alphabet") if t.len() == 2 => d.alphabet = Some(int(line, t[1])?),
            (Some(d), "stack") => d.stack = t[1..].iter().map(|x| int(line, x)).collect::<Result<_, _>>()?,
            (Some(d), "rule") => d.rules.push(parse_rule(line, &t)?),
            (Some(_), "end") if t.len() == 1 => threads.push(open.take().expect("open block")),
            (_, other) => return Err(syntax(line, format!("unexpected `{other}`"))),
        }
    }
    if open.is_some() {
        return Err(syntax(last_line, "missing `end`"));
    }
    let shared_size = shared.ok_or_else(|| syntax(last_line, "missing `shared`"))?;
    let init = init.ok_or_else(|| syntax(last_line, "missing `init`"))?;

    let mut b = ProgramBuilder::new("cpds", vec![ValueDomain::Finite { size: shared_size }]);
    let mut rules = Vec::new();
    let mut alphabets = Vec::new();
    let mut init_locals = Vec::new();
    for d in &threads {
        let alphabet = d.alphabet.ok_or_else(|| syntax(last_line, format!("thread `{}` has no alphabet", d.name)))?;
        let mut ids = Vec::new();
        for r in &d.rules {
            let rule = r.clone();
            let id = b.action_with_endpoints(
                format!("{}: {} {} -> {} {:?}", d.name, r.from_shared, r.from_top, r.to_shared, r.kind),
                move |g, stack| rule.apply(g[0], stack).map(|(g2, s2)| vec![(vec![g2], s2)]).unwrap_or_default(),
                vec![r.endpoint()],
            );
            ids.push(id);
            rules.push(r.clone());
        }
        for c in 0..d.copies {
            let name = if d.copies == 1 { d.name.clone() } else { format!("{}#{c}", d.name) };
            b.thread(name, d.name.clone(), ids.clone(), LocalDomain::Stack { alphabet });
            alphabets.push(alphabet);
            init_locals.push(d.stack.clone());
        }
    }
    b.initial(ProgramState::new(vec![init], init_locals));
    let program = b.build();
    let report = validate_program(&program);
    if !report.is_ok() {
        return Err(CpdsError::Invalid(report));
    }
    Ok(Cpds {
        program,
        rules,
        alphabets,
        shared_size,
    })
}

/// Abstract successors of a pop rule fired by thread `t` from `a`: every
/// symbol, or nothing, may surface below the popped top.
pub fn pop_abs_successors(a: &AbstractState, rule: &CpdsRule, t: ThreadId, alphabet: i64) -> Vec<AbstractState> {
    if rule.kind != RuleKind::Pop || a.0[0] != rule.from_shared || a.0[1 + t.0] != rule.from_top {
        return Vec::new();
    }
    std::iter::once(EMPTY)
        .chain(0..alphabet)
        .map(|x| {
            let mut v = a.0.clone();
            v[0] = rule.to_shared;
            v[1 + t.0] = x;
            AbstractState(v)
        })
        .collect()
}

/// `(g, top_0, ..., top_{n-1})`.
#[derive(Clone, Debug)]
pub struct TopOfStack {
    rules: Vec<CpdsRule>,
    alphabets: Vec<i64>,
}

impl TopOfStack {
    pub fn new(sys: &Cpds) -> Self {
        Self {
            rules: sys.rules.clone(),
            alphabets: sys.alphabets.clone(),
        }
    }

    /// Upper bound on the number of abstract values.
    pub fn codomain_size(&self, shared_size: i64) -> u128 {
        self.alphabets
            .iter()
            .fold(shared_size as u128, |acc, &m| acc * (m as u128 + 1))
    }
}

impl Abstraction for TopOfStack {
    fn name(&self) -> &str {
        "top-of-stack"
    }

    fn alpha(&self, s: &ProgramState) -> AbstractState {
        let mut v = vec![s.shared[0]];
        v.extend(s.locals.iter().map(|w| w.first().copied().unwrap_or(EMPTY)));
        AbstractState(v)
    }

    fn respects(&self, action: ActionId, _: ThreadId) -> bool {
        self.rules[action.0].kind != RuleKind::Pop
    }

    fn disrespectful_successors(
        &self,
        a: &AbstractState,
        action: ActionId,
        thread: ThreadId,
        _: ThreadCount,
    ) -> Result<Vec<AbstractState>, AbstractionError> {
        let rule = &self.rules[action.0];
        if rule.kind != RuleKind::Pop {
            return Err(AbstractionError::MissingEnumerator { action, thread });
        }
        Ok(pop_abs_successors(a, rule, thread, self.alphabets[thread.0]))
    }
}

/// All stacks over `0..alphabet` of depth at most `depth`, top first.
pub fn stacks_up_to(alphabet: i64, depth: usize) -> Vec<Vec<i64>> {
    let mut out = vec![Vec::new()];
    let mut layer = vec![Vec::new()];
    for _ in 0..depth {
        let mut next = Vec::new();
        for w in &layer {
            for x in 0..alphabet {
                let mut v = w.clone();
                v.push(x);
                next.push(v);
            }
        }
        out.extend(next.iter().cloned());
        layer = next;
    }
    out
}

/// Every shared value with every combination of stacks up to `depth`.
pub fn audit_scope(sys: &Cpds, depth: usize) -> RespectScope {
    let mut combos: Vec<Vec<Vec<i64>>> = vec![Vec::new()];
    for &m in &sys.alphabets {
        let options = stacks_up_to(m, depth);
        combos = combos
            .into_iter()
            .flat_map(|prefix| {
                options.iter().map(move |w| {
                    let mut v = prefix.clone();
                    v.push(w.clone());
                    v
                })
            })
            .collect();
    }
    let mut states = Vec::new();
    for g in 0..sys.shared_size {
        for ls in &combos {
            states.push(ProgramState::new(vec![g], ls.clone()));
        }
    }
    RespectScope {
        states,
        threads: sys.program.thread_ids().collect(),
        exhaustive: false,
    }
}

/// Pop rules that can fire somewhere in the scope.
pub fn enabled_pops(sys: &Cpds, scope: &RespectScope) -> BTreeSet<ActionId> {
    let mut out = BTreeSet::new();
    for (i, r) in sys.rules.iter().enumerate() {
        if r.kind != RuleKind::Pop {
            continue;
        }
        let id = ActionId(i);
        if scope
            .states
            .iter()
            .any(|s| scope.threads.iter().any(|&t| sys.program.fire(id, s, t).is_some()))
        {
            out.insert(id);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::abstraction::{brute_force_successors, verify_respect, RespectVerdict};

    pub(crate) const ONE_POP: &str = "cpds\nshared 1\ninit 0\nthread a copies 1\n  alphabet 2\n  stack 1 0\n  rule 0 1 -> 0 pop\nend\n";

    #[test]
    fn single_pop_system_parses() {
        let sys = parse_cpds(ONE_POP).unwrap();
        assert_eq!(sys.program.thread_count(), 1);
        assert_eq!(sys.program.actions().len(), 1);
        assert_eq!(sys.program.initial()[0].locals[0], vec![1, 0]);
    }

    #[test]
    fn out_of_alphabet_rule_is_a_domain_error() {
        let text = "cpds\nshared 1\ninit 0\nthread a copies 1\n alphabet 4\n rule 0 5 -> 0 pop\nend\n";
        assert!(matches!(parse_cpds(text), Err(CpdsError::Invalid(_))));
    }

    #[test]
    fn copies_share_rules() {
        let text = "cpds\nshared 2\ninit 0\nthread w copies 2\n alphabet 2\n stack 0\n rule 0 0 -> 1 over 1\nend\n";
        let sys = parse_cpds(text).unwrap();
        assert_eq!(sys.program.thread_count(), 2);
        assert_eq!(sys.program.threads()[0].actions, sys.program.threads()[1].actions);
    }

    #[test]
    fn syntax_errors_carry_line_numbers() {
        let text = "cpds\nshared 1\ninit 0\nthread a copies 1\n alphabet 2\n rule 0 1 => 0 pop\nend\n";
        assert_eq!(
            parse_cpds(text).unwrap_err(),
            CpdsError::Syntax { line: 6, message: "expected `rule <g> <sym> -> <g'> <over|push|pop> ...`".into() }
        );
        assert!(matches!(parse_cpds("async\n"), Err(CpdsError::Syntax { line: 1, .. })));
    }

    #[test]
    fn push_places_new_top_first() {
        let r = CpdsRule { from_shared: 0, from_top: 1, to_shared: 0, kind: RuleKind::Push(2, 3) };
        assert_eq!(r.apply(0, &[1, 0]), Some((0, vec![2, 3, 0])));
        assert_eq!(r.apply(0, &[]), None);
    }

    #[test]
    fn pop_successors_include_every_symbol_and_empty() {
        let r = CpdsRule { from_shared: 0, from_top: 1, to_shared: 0, kind: RuleKind::Pop };
        let got = pop_abs_successors(&AbstractState::new([0, 1]), &r, ThreadId(0), 2);
        let want = vec![AbstractState::new([0, EMPTY]), AbstractState::new([0, 0]), AbstractState::new([0, 1])];
        assert_eq!(got, want);
        assert!(pop_abs_successors(&AbstractState::new([0, EMPTY]), &r, ThreadId(0), 2).is_empty());
        assert!(pop_abs_successors(&AbstractState::new([1, 1]), &r, ThreadId(0), 2).is_empty());
    }

    #[test]
    fn pop_successors_match_depth_two_witnesses() {
        let sys = parse_cpds(ONE_POP).unwrap();
        let abs = TopOfStack::new(&sys);
        let scope = audit_scope(&sys, 2);
        let brute = brute_force_successors(&sys.program, &abs, ActionId(0), ThreadId(0), &scope.states);
        for (a, succ) in brute {
            let closed: BTreeSet<_> = abs
                .disrespectful_successors(&a, ActionId(0), ThreadId(0), ThreadCount::Fixed(1))
                .unwrap()
                .into_iter()
                .collect();
            assert_eq!(closed, succ);
        }
    }

    #[test]
    fn pop_is_refuted_by_two_stacks() {
        let sys = parse_cpds(ONE_POP).unwrap();
        let abs = TopOfStack::new(&sys);
        let scope = audit_scope(&sys, 3);
        assert!(matches!(verify_respect(&sys.program, &abs, ActionId(0), &scope), RespectVerdict::Refuted(_)));
        assert_eq!(enabled_pops(&sys, &scope).len(), 1);
    }

    #[test]
    fn codomain_bound() {
        let sys = parse_cpds(ONE_POP).unwrap();
        assert_eq!(TopOfStack::new(&sys).codomain_size(1), 3);
    }
}
