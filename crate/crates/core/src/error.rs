use thiserror::Error;

/// Errors raised by the state algebra, the optics model and the experiment harness.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("basis mismatch: {0}")]
    BasisMismatch(String),

    #[error("tensor factors both carry the {0} slot")]
    OverlappingSlots(&'static str),

    #[error("duplicate mode label {0}")]
    DuplicateLabel(String),

    #[error("amplitude count {found} does not match basis dimension {expected}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("state is not normalized (norm² = {0})")]
    NotNormalized(f64),

    #[error("measurement basis is not orthonormal and complete: {0}")]
    BadMeasurementBasis(String),

    #[error("optical element #{index} ({kind}) is not unitary (deviation {deviation:.3e})")]
    NonUnitary {
        index: usize,
        kind: String,
        deviation: f64,
    },

    #[error("challenge inference is ambiguous for outcome {outcome} in pair {pair}")]
    AmbiguousInference { outcome: String, pair: String },

    #[error("invalid imperfection config: {0}")]
    InvalidConfig(String),

    #[error("invalid trial plan: {0}")]
    InvalidPlan(String),

    #[error("{0}")]
    InvalidArgument(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
