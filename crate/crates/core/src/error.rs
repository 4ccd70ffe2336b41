use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("empty input")]
    EmptyInput,

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("window [{start}, {end}) exceeds a signal of length {len}")]
    WindowOutOfRange {
        start: usize,
        end: usize,
        len: usize,
    },

    #[error("model order must be at least 1")]
    ZeroOrder,

    #[error("roots are numerically repeated (min pairwise distance {0:e})")]
    RepeatedRoots(f64),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("singular or ill-conditioned matrix: {0}")]
    Singular(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("internal invariant violated: {0}")]
    Invariant(String),

    #[error("calibration failed: {0}")]
    Calibration(String),

    #[error("malformed input: {0}")]
    Malformed(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
