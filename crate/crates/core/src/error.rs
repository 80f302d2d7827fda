use thiserror::Error;

/// Errors surfaced by every layer of the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    Argument(String),

    /// A covariance matrix could not be factorized even after jitter escalation.
    #[error("numerical failure: {message} (largest jitter attempted: {jitter:e})")]
    Numerical { message: String, jitter: f64 },

    #[error("hyperparameter fitting failed: {0}")]
    Fit(String),

    #[error("acquisition evaluation failed: {0}")]
    Evaluation(String),

    #[error("rendering failed: {0}")]
    Render(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("transport error: {0}")]
    Transport(String),

    #[error("not found: {0}")]
    NotFound(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("validation error: {0}")]
    Validation(String),

    #[error("undefined quantity: {0}")]
    Undefined(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn arg(msg: impl Into<String>) -> Self {
        Error::Argument(msg.into())
    }
}
