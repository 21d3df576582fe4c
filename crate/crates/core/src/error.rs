use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("matrix is not positive semidefinite (eigenvalue {eigenvalue:e}, tolerance {tolerance:e})")]
    NotPsd { eigenvalue: f64, tolerance: f64 },

    #[error("numerical divergence at step {step}: {reason}")]
    Divergence { step: usize, reason: String },

    #[error("constraint violation: {0}")]
    Constraint(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn input(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
