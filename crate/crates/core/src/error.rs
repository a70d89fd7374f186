use thiserror::Error;

/// Errors produced by the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("value {value} at row {row}, column {col} is outside [{min}, {max}]")]
    OutOfRange {
        row: usize,
        col: usize,
        value: f64,
        min: f64,
        max: f64,
    },

    #[error("invalid range for column {col} ({name}): min {min} must be below max {max}")]
    InvalidRange {
        col: usize,
        name: String,
        min: f64,
        max: f64,
    },

    #[error("matrix is not positive semidefinite: eigenvalue {eigenvalue:e} below -{tolerance:e}")]
    NotPsd { eigenvalue: f64, tolerance: f64 },

    #[error("duplicate design points at rows {0} and {1}")]
    DuplicatePoint(usize, usize),

    #[error("kernel matrix could not be factorized even with nugget {0:e}")]
    IllConditioned(f64),

    #[error("empirical moment matrix is rank deficient")]
    RankDeficient,

    #[error("degenerate matrix: {0}")]
    Degenerate(String),

    #[error("unsupported geometry: {0}")]
    UnsupportedGeometry(String),

    #[error("invalid configuration: {0}")]
    InvalidConfiguration(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidInput(msg.into()))
}
