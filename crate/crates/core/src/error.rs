use thiserror::Error;

/// Errors raised by the full-order, flux and reduced-basis layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{kind} index {index} out of range (size {len})")]
    IndexOutOfRange {
        kind: &'static str,
        index: usize,
        len: usize,
    },

    #[error("non-finite value encountered: {0}")]
    NonFinite(String),

    #[error("point ({x}, {y}) is not on {what} (distance {distance:e})")]
    PointOffEntity {
        what: String,
        x: f64,
        y: f64,
        distance: f64,
    },

    #[error("matrix is not positive definite: pivot {pivot:e} at row {row}")]
    NotPositiveDefinite { row: usize, pivot: f64 },

    #[error("system is not positive definite (penalty too small or invalid parameter): {0}")]
    PenaltyTooSmall(String),

    #[error("conjugate gradients did not converge: relative residual {residual:e} after {iterations} iterations")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("parameter {mu:?} outside the parameter box")]
    ParameterOutOfBounds { mu: Vec<f64> },

    #[error("singular reduced system: {0}")]
    SingularReducedSystem(String),

    #[error("greedy did not converge: {0}")]
    GreedyStagnation(String),

    #[error("model file: {0}")]
    Model(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
