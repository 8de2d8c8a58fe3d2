use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("singular system: {0}")]
    Singular(String),

    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),

    #[error("dimension {n} exceeds the dense cap of {cap}")]
    TooLarge { n: usize, cap: usize },

    #[error("zero-degree vertex {0}")]
    ZeroDegree(usize),

    #[error("support violation: {0}")]
    Support(String),

    #[error("covariance collapsed along column {column} (pivot {pivot:e})")]
    CovarianceCollapse { column: usize, pivot: f64 },

    #[error("internal inconsistency: {0}")]
    Inconsistent(String),

    #[error("non-finite value encountered: {0}")]
    NonFinite(String),

    #[error("terminal state {0} cannot be stepped")]
    Terminal(usize),

    #[error("layout error: {0}")]
    Layout(String),

    #[error("trust-region fault: {0}")]
    TrustRegion(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
