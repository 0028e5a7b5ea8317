//! Round-Robin bounded exploration with abstract convergence detection.

pub mod abstraction;
pub mod async_format;
pub mod baselines;
pub mod cli;
pub mod cpds;
pub mod explore;
pub mod model;
pub mod models;
pub mod random;
pub mod report;
pub mod schedule;
pub mod unbounded;
