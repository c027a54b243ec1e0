use thiserror::Error;

/// Errors produced by the estimators, simulators and experiment harnesses.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("{name} = {value} is out of range: requires {constraint}")]
    OutOfRange {
        name: &'static str,
        value: f64,
        constraint: String,
    },

    #[error("out-of-order update: expected index {expected}, got {got}")]
    OutOfOrder { expected: usize, got: usize },

    #[error("non-finite state encountered at step {step}")]
    NumericalOverflow { step: usize },

    #[error("estimator holds no observations")]
    EmptyState,

    #[error("grid of {nodes} nodes exceeds the limit of {limit}")]
    ResourceLimit { nodes: u128, limit: u128 },

    #[error("infeasible configuration: {0}")]
    Infeasible(String),

    #[error("unsupported noise: {0}")]
    UnsupportedNoise(String),

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("inadmissible CLT configuration: {0}")]
    Inadmissible(String),

    #[error("snapshot: {0}")]
    Snapshot(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for failures caused by arithmetic blowing up rather than bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::NumericalOverflow { .. })
    }

    pub(crate) fn out_of_range(name: &'static str, value: f64, constraint: impl Into<String>) -> Self {
        Error::OutOfRange {
            name,
            value,
            constraint: constraint.into(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got })
    }
}
