//! Built-in models with their abstractions.

pub mod example2;
pub mod example3;
pub mod program_p;
pub mod ticket_lock;

use thiserror::Error;

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("model `{model}` needs at least {min} threads, got {got}")]
    TooFewThreads { model: &'static str, min: usize, got: usize },
    #[error("unknown abstraction variant `{0}`")]
    UnknownVariant(String),
    #[error("unknown built-in model `{0}`")]
    UnknownModel(String),
}

/// Names accepted by [`crate::cli`].
pub const BUILTIN_NAMES: &[&str] = &["example2", "example3", "program-p", "ticket-lock", "ticket-lock-double-inc"];
