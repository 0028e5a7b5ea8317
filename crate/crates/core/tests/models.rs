mod common;

use std::collections::BTreeSet;

use rrcheck::abstraction::{AbstractState, Abstraction, Property};
use rrcheck::async_format::parse_async_model;
use rrcheck::baselines::{free_bfs, FreeBfs};
use rrcheck::cpds::parse_cpds;
use rrcheck::explore::{druba, Caps, Verdict};
use rrcheck::model::Program;
use rrcheck::models::example2::{example2_family, shared_abstraction};
use rrcheck::models::example3::{example3_model, S};
use rrcheck::models::program_p::{assertion, program_p_alpha, program_p_model, Variant};
use rrcheck::models::ticket_lock::{mutual_exclusion, ticket_lock_alpha, ticket_lock_double_increment, ticket_lock_model};
use rrcheck::models::ModelError;
use rrcheck::schedule::validate_rr_path;
use rrcheck::unbounded::verify_unbounded;

fn states(xs: &[&[i64]]) -> BTreeSet<AbstractState> {
    xs.iter().map(|x| AbstractState::new(x.to_vec())).collect()
}

#[test]
fn ticket_lock_abstract_states_are_frozen() {
    // Computed once by this implementation and kept as a regression fixture.
    let want = states(&[&[0, 1, 0, 0, 1], &[0, 1, 0, 1, 1], &[1, 1, 0, 1, 1], &[2, 1, 0, 0, 1]]);
    for n in [2, 3] {
        let v = druba(&ticket_lock_model(n).unwrap(), &ticket_lock_alpha(), &mutual_exclusion(), Caps::default()).unwrap();
        assert_eq!(v.abs_states, want, "n = {n}");
    }
}

#[test]
fn ticket_lock_mutant_is_caught_with_a_valid_witness() {
    let p = ticket_lock_double_increment(2).unwrap();
    let v = druba(&p, &ticket_lock_alpha(), &mutual_exclusion(), Caps::default()).unwrap();
    assert_eq!(v.verdict, Verdict::Violation);
    let w = v.witness.unwrap();
    let check = validate_rr_path(&p, &w.path, &w.schedule, u64::from(v.r_max), u64::from(v.d_max)).unwrap();
    assert!(check.accepted(), "{:?}", check.diagnostics);
    assert!(matches!(
        free_bfs(&p, &ticket_lock_alpha(), &mutual_exclusion(), Some(100_000)),
        FreeBfs::Violation { .. }
    ));
}

#[test]
fn alpha1_reach_is_the_projection_of_alpha2_reach() {
    let p = program_p_model(2).unwrap();
    let a1 = druba(&p, &program_p_alpha(Variant::Alpha1), &assertion(), Caps::default()).unwrap();
    let a2 = druba(&p, &program_p_alpha(Variant::Alpha2), &assertion(), Caps::default()).unwrap();
    let projected: BTreeSet<AbstractState> = a2.abs_states.iter().map(|a| AbstractState::new(a.0[..2].to_vec())).collect();
    assert_eq!(a1.abs_states, projected);
    assert_eq!(a1.abs_states.len(), 8);
}

#[test]
fn program_p_alpha2_three_threads_needs_m_one_after_increment() {
    let p = program_p_model(3).unwrap();
    let v = druba(&p, &program_p_alpha(Variant::Alpha2), &assertion(), Caps::default()).unwrap();
    assert_eq!(v.verdict, Verdict::Unknown);
    assert_eq!(v.abs_states.len(), 13);
    assert!(v.abs_states.contains(&AbstractState::new([0, 0, 0])));
    assert!(!v.abs_states.contains(&AbstractState::new([1, 0, 1])));
}

#[test]
fn program_p_alpha3_unbounded_agrees_with_fixed_runs() {
    let fam = |n: usize| -> Result<(Program, Box<dyn Abstraction>), ModelError> {
        Ok((program_p_model(n)?, Box::new(program_p_alpha(Variant::Alpha3))))
    };
    let u = verify_unbounded(&fam, &assertion(), 2, 6, Caps::default()).unwrap();
    let fixed = druba(&program_p_model(3).unwrap(), &program_p_alpha(Variant::Alpha3), &assertion(), Caps::default()).unwrap();
    assert_eq!(u.abs_states, fixed.abs_states);
}

#[test]
fn abstract_reach_grows_with_threads() {
    let check = |name: &str, range: std::ops::RangeInclusive<usize>, run: &dyn Fn(usize) -> BTreeSet<AbstractState>| {
        let sets: Vec<_> = range.map(run).collect();
        for w in sets.windows(2) {
            assert!(w[0].is_subset(&w[1]), "{name}");
        }
    };
    check("program P alpha3", 2..=4, &|n| {
        druba(&program_p_model(n).unwrap(), &program_p_alpha(Variant::Alpha3), &assertion(), Caps::default()).unwrap().abs_states
    });
    check("program P alpha2", 2..=3, &|n| {
        druba(&program_p_model(n).unwrap(), &program_p_alpha(Variant::Alpha2), &assertion(), Caps::default()).unwrap().abs_states
    });
    check("ticket lock", 2..=4, &|n| {
        druba(&ticket_lock_model(n).unwrap(), &ticket_lock_alpha(), &mutual_exclusion(), Caps::default()).unwrap().abs_states
    });
    check("example2", 3..=4, &|n| {
        let p = example2_family(n).unwrap();
        druba(&p, &shared_abstraction(&p), &Property::always(), Caps::default()).unwrap().abs_states
    });
}

#[test]
fn example3_single_thread_sets_s() {
    let p = example3_model(1).unwrap();
    let FreeBfs::Reached(reach) = free_bfs(&p, &rrcheck::abstraction::Identity, &Property::always(), None) else {
        panic!("finite model");
    };
    assert!(reach.iter().any(|s| s.shared[S] == 1));
}

#[test]
fn example3_two_threads_reach_s_under_free_scheduling() {
    let p = example3_model(2).unwrap();
    let FreeBfs::Reached(reach) = free_bfs(&p, &rrcheck::abstraction::Identity, &Property::always(), None) else {
        panic!("finite model");
    };
    assert!(reach.iter().any(|s| s.shared[S] == 1));
}

#[test]
fn async_encoding_of_example2_matches_builtin() {
    let text = std::fs::read_to_string(common::data("example2.async")).unwrap();
    let m = parse_async_model(&text).unwrap();
    let file_abs = shared_abstraction(&m.program);
    let from_file = druba(&m.program, &file_abs, &Property::always(), Caps::default()).unwrap();
    let builtin = common::example2();
    let from_builtin = druba(&builtin.program, builtin.abs.as_ref(), &builtin.prop, Caps::default()).unwrap();
    assert_eq!(from_file.verdict, from_builtin.verdict);
    assert_eq!(from_file.abs_states, from_builtin.abs_states);
    assert_eq!((from_file.r_max, from_file.d_max), (from_builtin.r_max, from_builtin.d_max));

    let with_error = druba(&m.program, &file_abs, &m.property(), Caps::default()).unwrap();
    assert_eq!(with_error.verdict, Verdict::Violation);
}

#[test]
fn pushdown_sample_terminates() {
    let c = common::stacks();
    let v = druba(&c.program, c.abs.as_ref(), &c.prop, Caps::default()).unwrap();
    assert_ne!(v.verdict, Verdict::Violation);
    assert!(!v.abs_states.is_empty());
    let sys = parse_cpds(&std::fs::read_to_string(common::data("stacks.cpds")).unwrap()).unwrap();
    assert_eq!(sys.program.thread_count(), 2);
}
