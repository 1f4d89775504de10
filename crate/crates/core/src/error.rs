use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid dimension: {0}")]
    InvalidDimension(String),

    #[error("matrix is singular or not positive definite (pivot {pivot})")]
    Singular { pivot: usize },

    #[error("ill-posed spectral decomposition: {0}")]
    IllPosed(String),

    #[error("prediction step {step} outside 1..={max}")]
    InvalidStep { step: usize, max: usize },

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("numeric failure at {stage} index {index}")]
    NumericFailure { stage: &'static str, index: usize },

    #[error("config error at line {line}, key `{key}`: {message}")]
    Config {
        key: String,
        line: usize,
        message: String,
    },

    #[error("model file: {0}")]
    ModelFile(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures caused by floating-point breakdown rather than bad input.
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            Error::Singular { .. } | Error::NumericFailure { .. } | Error::IllPosed(_)
        )
    }
}
