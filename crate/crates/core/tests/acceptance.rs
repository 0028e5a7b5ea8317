//! Acceptance criteria AC1 to AC11. Runs without the libtest harness so
//! that every criterion prints one PASS or FAIL line.

mod common;

use std::collections::BTreeSet;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rrcheck::abstraction::{alpha_image, verify_respect, AbstractState, Abstraction, Property, RespectScope};
use rrcheck::baselines::{delay_bounded_test, free_bfs, frontier_vs_naive, naive_cell, naive_grid, naive_walk_image_calls, FreeBfs, TestOutcome};
use rrcheck::cpds::{audit_scope as stack_scope, parse_cpds, RuleKind, TopOfStack};
use rrcheck::explore::{druba, Caps, UnknownReason, Verdict};
use rrcheck::model::{ActionId, Program, ThreadId};
use rrcheck::models::example2::{example2_family, example2_model, shared_abstraction};
use rrcheck::models::example3::{example3_model, S as EX3_S};
use rrcheck::models::program_p::{self, assertion, program_p_alpha, program_p_model, Variant};
use rrcheck::models::ticket_lock::{self, line_of, mutual_exclusion, ticket_lock_alpha, ticket_lock_model};
use rrcheck::models::ModelError;
use rrcheck::schedule::validate_rr_path;
use rrcheck::unbounded::verify_unbounded;

type Outcome = Result<String, String>;
type Criterion = (&'static str, &'static str, fn() -> Outcome);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(started: Instant, limit: Duration) -> Result<(), String> {
    let t = started.elapsed();
    ensure(t < limit, || format!("took {t:?}, limit {limit:?}"))
}

fn set(xs: &[i64]) -> BTreeSet<AbstractState> {
    xs.iter().map(|&x| AbstractState::new([x])).collect()
}

fn ac1() -> Outcome {
    let started = Instant::now();
    let p = example2_model();
    let abs = shared_abstraction(&p);
    let grid = naive_grid(&p, &abs, 3, 4);
    // Reference grid: rows r = 1..3, columns d = 0..4.
    let table: [[&[i64]; 5]; 3] = [
        [&[0, 1], &[0, 1], &[0, 1, 2], &[0, 1, 2], &[0, 1, 2]],
        [&[0, 1], &[0, 1], &[0, 1, 2], &[0, 1, 2], &[0, 1, 2]],
        [&[0, 1], &[0, 1], &[0, 1, 2], &[0, 1, 2], &[0, 1, 2]],
    ];
    for (i, row) in table.iter().enumerate() {
        let r = i as u32 + 1;
        for (d, want) in row.iter().enumerate() {
            let got = grid.abstract_cell(r, d as u32);
            ensure(got == &set(want), || format!("R[{r},{d}] = {got:?}, want {want:?}"))?;
        }
    }
    let v = druba(&p, &abs, &Property::always(), Caps::default()).map_err(|e| e.to_string())?;
    ensure(v.verdict == Verdict::Safe, || format!("druba verdict {:?}", v.verdict))?;
    ensure(v.abs_states == set(&[0, 1, 2]), || format!("druba reach {:?}", v.abs_states))?;
    within(started, Duration::from_secs(1))?;
    Ok(format!("15 cells match; druba safe with {{0,1,2}} at ({}, {})", v.r_max, v.d_max))
}

fn ac2() -> Outcome {
    let started = Instant::now();
    let p = program_p_model(2).map_err(|e| e.to_string())?;
    let a1 = druba(&p, &program_p_alpha(Variant::Alpha1), &assertion(), Caps::default()).map_err(|e| e.to_string())?;
    ensure(a1.verdict == Verdict::Unknown, || format!("alpha1 verdict {:?}", a1.verdict))?;
    let Some(UnknownReason::ClosureFailed(cx)) = &a1.reason else {
        return Err(format!("alpha1 reason {:?}", a1.reason));
    };
    ensure(cx.from == AbstractState::new([1, 0]) && cx.to == AbstractState::new([2, 0]), || {
        format!("alpha1 counterexample {} -> {}", cx.from, cx.to)
    })?;
    let a2 = druba(&p, &program_p_alpha(Variant::Alpha2), &assertion(), Caps::default()).map_err(|e| e.to_string())?;
    ensure(a2.verdict == Verdict::Safe, || format!("alpha2 verdict {:?}", a2.verdict))?;
    ensure(a2.abs_states.len() == 12, || format!("alpha2 reached {} abstract states", a2.abs_states.len()))?;
    within(started, Duration::from_secs(5))?;
    Ok(format!(
        "alpha1 unknown via {} -> {}; alpha2 safe with 12 states; plateaus at ({}, {}) and ({}, {}), reference (7, 4)",
        cx.from, cx.to, a1.r_max, a1.d_max, a2.r_max, a2.d_max
    ))
}

fn p_family(variant: Variant) -> impl Fn(usize) -> Result<(Program, Box<dyn Abstraction>), ModelError> {
    move |n| Ok((program_p_model(n)?, Box::new(program_p_alpha(variant)) as Box<dyn Abstraction>))
}

fn ac3() -> Outcome {
    let started = Instant::now();
    let u2 = verify_unbounded(&p_family(Variant::Alpha2), &assertion(), 2, 6, Caps::default()).map_err(|e| e.to_string())?;
    let last = u2.last().ok_or("no runs")?;
    ensure(u2.verdict == Verdict::Unknown && last.n == 3, || {
        format!("alpha2 family: {:?} at n = {}", u2.verdict, last.n)
    })?;
    let u3 = verify_unbounded(&p_family(Variant::Alpha3), &assertion(), 2, 6, Caps::default()).map_err(|e| e.to_string())?;
    ensure(u3.verdict == Verdict::Safe, || format!("alpha3 family: {:?} {:?}", u3.verdict, u3.reason))?;
    ensure(u3.abs_states.len() == 14, || format!("alpha3 family: {} states", u3.abs_states.len()))?;
    let at = |n: usize| u3.per_n.iter().find(|r| r.n == n).map(|r| &r.report.abs_states);
    let (s3, s4) = (at(3).ok_or("no n = 3 run")?, at(4).ok_or("no n = 4 run")?);
    ensure(s3.len() == 14 && s3 == s4, || format!("n = 3: {}, n = 4: {}", s3.len(), s4.len()))?;
    within(started, Duration::from_secs(30))?;
    Ok("alpha2 unknown at n = 3; alpha3 safe, 14 states at n = 3 and n = 4".into())
}

fn ac4() -> Outcome {
    let started = Instant::now();
    let alpha = ticket_lock_alpha();
    for n in [2, 3] {
        let p = ticket_lock_model(n).map_err(|e| e.to_string())?;
        let v = druba(&p, &alpha, &mutual_exclusion(), Caps::default()).map_err(|e| e.to_string())?;
        ensure(v.verdict == Verdict::Safe, || format!("n = {n}: {:?}", v.verdict))?;
        ensure(v.abs_states.len() == 4, || format!("n = {n}: {} states", v.abs_states.len()))?;
        ensure(v.abs_states.iter().all(|a| a.0[2] == 0), || format!("n = {n}: P2 holds somewhere"))?;
    }
    let family = |n: usize| -> Result<(Program, Box<dyn Abstraction>), ModelError> {
        Ok((ticket_lock_model(n)?, Box::new(ticket_lock_alpha())))
    };
    let u = verify_unbounded(&family, &mutual_exclusion(), 2, 6, Caps::default()).map_err(|e| e.to_string())?;
    ensure(u.verdict == Verdict::Safe, || format!("unbounded: {:?} {:?}", u.verdict, u.reason))?;
    ensure(u.abs_states.len() == 4, || format!("unbounded: {} states", u.abs_states.len()))?;
    within(started, Duration::from_secs(60))?;
    Ok(format!("4 states at n = 2 and 3, P2 never true; unbounded safe with plateau at n = {:?}", u.n_plateau_at))
}

fn ac5() -> Outcome {
    let started = Instant::now();
    let shared = |n: usize, r: u32| -> Result<BTreeSet<Vec<i64>>, String> {
        let p = example3_model(n).map_err(|e| e.to_string())?;
        Ok(naive_cell(&p, r, 0).states.into_iter().map(|s| s.shared).collect())
    };
    let one_three = shared(1, 3)?;
    ensure(one_three.iter().any(|g| g[EX3_S] == 1), || "R[3,0,1] has no s = 1".into())?;
    for r in 0..=20 {
        let two = shared(2, r)?;
        ensure(!one_three.is_subset(&two), || format!("R[3,0,1] is contained in R[{r},0,2]"))?;
        ensure(two.iter().all(|g| g[EX3_S] == 0), || format!("R[{r},0,2] has s = 1"))?;
        if r >= 3 {
            ensure(!shared(1, r)?.is_subset(&two), || format!("R[{r},0,1] is contained in R[{r},0,2]"))?;
        }
    }
    within(started, Duration::from_secs(5))?;
    Ok("R[3,0,1] not in R[r,0,2] for r <= 20; R[r,0,1] not in R[r,0,2] for 3 <= r <= 20".into())
}

fn ac6() -> Outcome {
    let started = Instant::now();
    let (mut safe, mut bad) = (0, 0);
    for seed in common::SEEDS {
        let c = common::random(seed);
        let v = druba(&c.program, c.abs.as_ref(), &c.prop, Caps::default()).map_err(|e| e.to_string())?;
        match free_bfs(&c.program, c.abs.as_ref(), &c.prop, Some(1_000_000)) {
            FreeBfs::Reached(states) => {
                ensure(v.verdict == Verdict::Safe, || format!("{}: druba {:?}, oracle safe", c.name, v.verdict))?;
                let want = alpha_image(c.abs.as_ref(), &states);
                ensure(v.abs_states == want, || format!("{}: {} vs {} states", c.name, v.abs_states.len(), want.len()))?;
                safe += 1;
            }
            FreeBfs::Violation { .. } => {
                ensure(v.verdict == Verdict::Violation, || format!("{}: druba {:?}, oracle violation", c.name, v.verdict))?;
                bad += 1;
            }
            FreeBfs::CapExceeded { .. } => return Err(format!("{}: oracle cap exceeded", c.name)),
        }
    }
    within(started, Duration::from_secs(60))?;
    Ok(format!("{} models agree ({safe} safe, {bad} violations)", safe + bad))
}

fn ac7() -> Outcome {
    let mut points = 0;
    let cases = common::corpus();
    for c in &cases {
        let rows = frontier_vs_naive(&c.program, c.abs.as_ref(), &c.prop, Caps::default()).map_err(|e| e.to_string())?;
        for (pt, frontier, naive) in rows {
            ensure(frontier == naive, || {
                format!("{} at ({}, {}): {} vs {} states", c.name, pt.r, pt.d, frontier.len(), naive.len())
            })?;
            points += 1;
        }
    }
    Ok(format!("{points} visited bound pairs over {} models match", cases.len()))
}

fn ac8() -> Outcome {
    let cases = common::corpus();
    for c in &cases {
        let grid = naive_grid(&c.program, c.abs.as_ref(), 5, 6);
        for r in 0..=5 {
            for d in 0..=6 {
                let here = &grid.cell(r, d).states;
                if r < 5 {
                    ensure(here.is_subset(&grid.cell(r + 1, d).states), || format!("{}: R[{r},{d}] not in R[{},{d}]", c.name, r + 1))?;
                }
                if d < 6 {
                    ensure(here.is_subset(&grid.cell(r, d + 1).states), || format!("{}: R[{r},{d}] not in R[{r},{}]", c.name, d + 1))?;
                }
            }
        }
    }
    Ok(format!("both inclusions hold on {} models for r <= 5, d <= 6", cases.len()))
}

fn ac9() -> Outcome {
    let mut notes = Vec::new();
    let mut failures = Vec::new();
    let mut checked_random = 0;
    let mut cases = vec![common::example2(), common::program_p(2, Variant::Alpha2)];
    let plateau_checked = cases.len();
    cases.extend(common::SEEDS.map(common::random));
    for (i, c) in cases.iter().enumerate() {
        let v = druba(&c.program, c.abs.as_ref(), &c.prop, Caps::default()).map_err(|e| e.to_string())?;
        let frontier = v.image_calls_total();
        if i >= plateau_checked {
            let no_delay = alpha_image(c.abs.as_ref(), &naive_cell(&c.program, v.r_max, 0).states);
            if no_delay == v.abs_states {
                continue;
            }
            checked_random += 1;
        }
        let naive = naive_walk_image_calls(&c.program, &v.visited);
        if frontier >= naive {
            failures.push(format!("{}: frontier {frontier} >= naive {naive}", c.name));
        }
        if i < plateau_checked {
            let share = v.image_calls_final_plateau as f64 / frontier as f64;
            notes.push(format!("{} final plateau {}/{} = {:.1}%", c.name, v.image_calls_final_plateau, frontier, 100.0 * share));
            if share > 0.05 {
                failures.push(format!("{}: final plateau {:.1}% > 5%", c.name, 100.0 * share));
            }
        }
    }
    if failures.is_empty() {
        Ok(format!("frontier < naive on 2 models + {checked_random} random; {}", notes.join(", ")))
    } else {
        Err(failures.join("; "))
    }
}

fn classification_matches(p: &Program, abs: &dyn Abstraction, scope: &RespectScope, disrespectful: &[ActionId]) -> Result<(), String> {
    for a in p.actions() {
        let confirmed = verify_respect(p, abs, a.id, scope).is_confirmed();
        let expect_respect = !disrespectful.contains(&a.id);
        ensure(confirmed == expect_respect, || {
            format!("{}: `{}` confirmed = {confirmed}, expected {expect_respect}", abs.name(), a.label)
        })?;
    }
    Ok(())
}

fn ac10() -> Outcome {
    // Pushdown: push and overwrite respect the top-of-stack view, pop does not.
    let mut pops = 0;
    for file in ["single_pop.cpds", "stacks.cpds"] {
        let sys = parse_cpds(&std::fs::read_to_string(common::data(file)).unwrap()).map_err(|e| e.to_string())?;
        let abs = TopOfStack::new(&sys);
        let scope = stack_scope(&sys, 3);
        let pop_ids: Vec<ActionId> =
            sys.rules.iter().enumerate().filter(|(_, r)| r.kind == RuleKind::Pop).map(|(i, _)| ActionId(i)).collect();
        pops += pop_ids.len();
        classification_matches(&sys.program, &abs, &scope, &pop_ids)?;
    }

    // Program P at n = 3, tracked thread: one disrespectful statement for
    // alpha1 (the branch), one for alpha2 (m++), none for alpha3.
    let p = program_p_model(3).map_err(|e| e.to_string())?;
    let scope = program_p::audit_scope(3, 5).with_threads(vec![ThreadId(0)]);
    for (variant, expected) in [
        (Variant::Alpha1, vec![program_p::BRANCH]),
        (Variant::Alpha2, vec![program_p::INC_M]),
        (Variant::Alpha3, vec![]),
    ] {
        classification_matches(&p, &program_p_alpha(variant), &scope, &expected)?;
    }

    // Ticket Lock: the waiting line respects for every thread, line 1 does not.
    for n in [2, 3] {
        let p = ticket_lock_model(n).map_err(|e| e.to_string())?;
        let abs = ticket_lock_alpha();
        let scope = ticket_lock::audit_scope(n, 5);
        let mut refuted_lines = BTreeSet::new();
        for a in p.actions() {
            if !verify_respect(&p, &abs, a.id, &scope).is_confirmed() {
                refuted_lines.insert(line_of(a.id));
            }
        }
        ensure(refuted_lines == BTreeSet::from([1]), || format!("ticket lock n = {n}: disrespectful lines {refuted_lines:?}"))?;
    }
    Ok(format!("pushdown {pops} pops refuted, others confirmed; program P alpha1/2/3 and ticket lock match"))
}

fn ac11() -> Outcome {
    let p = example2_family(3).map_err(|e| e.to_string())?;
    let abs = shared_abstraction(&p);
    let prop = Property::shared_not(2);
    let TestOutcome::Violation { cell, witness, .. } = delay_bounded_test(&p, &abs, &prop, 4, 4) else {
        return Err("no violation found".into());
    };
    ensure(cell.d == 2, || format!("first found at ({}, {})", cell.r, cell.d))?;
    let check = validate_rr_path(&p, &witness.path, &witness.schedule, u64::from(cell.r), u64::from(cell.d))
        .map_err(|e| e.to_string())?;
    ensure(check.accepted(), || format!("witness rejected: {:?}", check.diagnostics))?;
    ensure(check.cost.delays == 2, || format!("witness costs {} delays", check.cost.delays))?;
    let limited = delay_bounded_test(&p, &abs, &prop, 4, 1);
    ensure(matches!(limited, TestOutcome::NoBugWithinBounds { .. }), || "found a bug with one delay".into())?;
    Ok(format!("first violation at ({}, {}), witness accepted with 2 delays", cell.r, cell.d))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 11] = [
        ("AC1", "Example 2 reference grid", ac1),
        ("AC2", "program P, n = 2", ac2),
        ("AC3", "program P, any thread count", ac3),
        ("AC4", "ticket lock", ac4),
        ("AC5", "non-monotonicity in n", ac5),
        ("AC6", "oracle equivalence on random models", ac6),
        ("AC7", "frontier equals naive at visited bounds", ac7),
        ("AC8", "monotonicity in r and d", ac8),
        ("AC9", "frontier benefit and final plateau share", ac9),
        ("AC10", "respect audits", ac10),
        ("AC11", "delay-bounded tester", ac11),
    ];
    let mut failed = 0;
    for (id, name, f) in criteria {
        let started = Instant::now();
        let res = std::panic::catch_unwind(f).unwrap_or_else(|_| Err("panicked".into()));
        let ms = started.elapsed().as_millis();
        match res {
            Ok(msg) => println!("{id} PASS [{ms} ms] {name}: {msg}"),
            Err(msg) => {
                failed += 1;
                println!("{id} FAIL [{ms} ms] {name}: {msg}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", 11 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
