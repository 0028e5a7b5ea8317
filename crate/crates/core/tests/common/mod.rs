#![allow(dead_code)]

use std::path::PathBuf;

use rrcheck::abstraction::{Abstraction, Identity, Property};
use rrcheck::cpds::{parse_cpds, TopOfStack};
use rrcheck::model::Program;
use rrcheck::models::example2::{example2_model, shared_abstraction};
use rrcheck::models::example3::example3_model;
use rrcheck::models::program_p::{assertion, program_p_alpha, program_p_model, Variant};
use rrcheck::models::ticket_lock::{mutual_exclusion, ticket_lock_alpha, ticket_lock_model};
use rrcheck::random::{random_async_model, RandomLimits};

pub struct Case {
    pub name: String,
    pub program: Program,
    pub abs: Box<dyn Abstraction>,
    pub prop: Property,
}

pub fn data(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name)
}

pub fn example2() -> Case {
    let program = example2_model();
    Case {
        name: "example2".into(),
        abs: Box::new(shared_abstraction(&program)),
        program,
        prop: Property::always(),
    }
}

pub fn program_p(n: usize, variant: Variant) -> Case {
    Case {
        name: format!("program-p n={n} {}", variant.name()),
        program: program_p_model(n).unwrap(),
        abs: Box::new(program_p_alpha(variant)),
        prop: assertion(),
    }
}

pub fn ticket_lock(n: usize) -> Case {
    Case {
        name: format!("ticket-lock n={n}"),
        program: ticket_lock_model(n).unwrap(),
        abs: Box::new(ticket_lock_alpha()),
        prop: mutual_exclusion(),
    }
}

pub fn stacks() -> Case {
    let sys = parse_cpds(&std::fs::read_to_string(data("stacks.cpds")).unwrap()).unwrap();
    Case {
        name: "stacks.cpds".into(),
        abs: Box::new(TopOfStack::new(&sys)),
        program: sys.program,
        prop: Property::always(),
    }
}

/// Seeds used wherever a fixed random sample is needed.
pub const SEEDS: std::ops::Range<u64> = 0..24;

pub fn random(seed: u64) -> Case {
    let m = random_async_model(seed, RandomLimits::default());
    Case {
        name: format!("random seed={seed}"),
        prop: m.property(),
        program: m.program,
        abs: Box::new(Identity),
    }
}

/// Built-in models whose druba runs terminate, plus the pushdown sample.
pub fn builtin_corpus() -> Vec<Case> {
    let mut out = vec![example2()];
    for n in [1, 2] {
        out.push(Case {
            name: format!("example3 n={n}"),
            program: example3_model(n).unwrap(),
            abs: Box::new(Identity),
            prop: Property::always(),
        });
    }
    out.push(program_p(2, Variant::Alpha2));
    out.push(ticket_lock(2));
    out.push(stacks());
    out
}

pub fn corpus() -> Vec<Case> {
    let mut out = builtin_corpus();
    out.extend(SEEDS.map(random));
    out
}
