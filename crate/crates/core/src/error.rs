use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum BoostError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{file}: row {row}: {reason}")]
    Parse {
        file: String,
        row: usize,
        reason: String,
    },

    #[error("curves live on different time grids")]
    GridMismatch,

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("degenerate range: all {0} samples are equal")]
    DegenerateRange(usize),

    #[error("intensity {value} at t={time} exceeds declared bound {bound}")]
    BoundViolation { time: f64, value: f64, bound: f64 },

    #[error("no convergence after {0} iterations")]
    NonConvergence(usize),

    #[error("metric undefined: {0}")]
    UndefinedMetric(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("model format: {0}")]
    ModelFormat(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl BoostError {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        BoostError::InvalidArgument(msg.into())
    }

    /// True for failures of the numerics rather than of the inputs.
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            BoostError::BoundViolation { .. } | BoostError::NonConvergence(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, BoostError>;
