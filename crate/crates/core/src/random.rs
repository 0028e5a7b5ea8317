//! Seeded random asynchronous programs, rendered in the async text format.

use std::fmt::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::async_format::{parse_async_model, AsyncModel};

/// Size limits for generated programs.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RandomLimits {
    pub max_threads: usize,
    pub max_shared: i64,
    pub max_locals: i64,
    pub max_rules: usize,
}

impl Default for RandomLimits {
    fn default() -> Self {
        Self {
            max_threads: 3,
            max_shared: 4,
            max_locals: 3,
            max_rules: 8,
        }
    }
}

/// Program text for `seed`. About half of the programs carry an error clause.
pub fn random_async_text(seed: u64, limits: RandomLimits) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shared = rng.random_range(1..=limits.max_shared);
    let threads = rng.random_range(1..=limits.max_threads);
    let mut out = String::new();
    writeln!(out, "# seed {seed}").unwrap();
    writeln!(out, "async\nshared {shared}\ninit {}", rng.random_range(0..shared)).unwrap();
    for i in 0..threads {
        let locals = rng.random_range(1..=limits.max_locals);
        writeln!(out, "thread T{i} copies 1\n  locals {locals}\n  linit {}", rng.random_range(0..locals)).unwrap();
        for _ in 0..rng.random_range(1..=limits.max_rules) {
            let (g, l) = (rng.random_range(0..shared), rng.random_range(0..locals));
            let (g2, l2) = (rng.random_range(0..shared), rng.random_range(0..locals));
            writeln!(out, "  rule {g} {l} -> {g2} {l2}").unwrap();
        }
        writeln!(out, "end").unwrap();
    }
    if rng.random_bool(0.5) {
        writeln!(out, "error shared {}", rng.random_range(0..shared)).unwrap();
    }
    out
}

pub fn random_async_model(seed: u64, limits: RandomLimits) -> AsyncModel {
    parse_async_model(&random_async_text(seed, limits)).expect("generated text is well formed")
}
