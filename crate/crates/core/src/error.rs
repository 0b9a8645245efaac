use thiserror::Error;

/// Errors produced by fitting, sampling, metrics and persistence.
#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot fit on empty latent set")]
    EmptyLatentSet,

    #[error("k must be positive")]
    NonPositiveK,

    #[error("vector outside grid bounds (dimension {dim}: {value} not in [{min}, {max}])")]
    OutsideGrid {
        dim: usize,
        value: f64,
        min: f64,
        max: f64,
    },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("more components than data points ({components} > {points})")]
    TooManyComponents { components: usize, points: usize },

    #[error("EM diverged (check regularization)")]
    EmDiverged,

    #[error("covariance not positive-definite")]
    NotPositiveDefinite,

    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),

    #[error("Sinkhorn did not converge in {iterations} iterations (marginal violation {violation:e})")]
    SinkhornNotConverged { iterations: usize, violation: f64 },

    #[error("distribution does not sum to 1 (sum = {0})")]
    NotNormalized(f64),

    #[error("non-finite value at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("malformed input: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
