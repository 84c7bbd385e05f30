//! Error type shared across the crate.

/// Crate-wide error type.
///
/// `NonFinite` is raised eagerly: vector operations refuse to produce NaN or
/// infinity rather than letting them propagate into later steps.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Two vectors that must share a dimension do not.
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// An operation produced (or was handed) a NaN or infinite value.
    #[error("non-finite value in {context}")]
    NonFinite { context: String },

    /// A run left the trust region: non-finite iterate or norm above the
    /// divergence threshold. Carries the step index at which it happened.
    #[error("run diverged at step {step} ({player}): {detail}")]
    Diverged {
        step: u64,
        player: &'static str,
        detail: String,
    },

    /// Caller violated an API contract (bad argument, unsupported combination).
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A config file failed to parse or failed validation.
    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
