//! Error types shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("state error: {0}")]
    State(String),

    #[error("illegal action for seat {seat}: {msg}")]
    Action { seat: usize, msg: String },

    #[error("shape mismatch: expected {expected}, got {got}")]
    Shape { expected: usize, got: usize },

    #[error("tracking error: {0}")]
    Tracking(String),

    #[error("perturbation error: {0}")]
    Perturbation(String),

    #[error("statistics error: {0}")]
    Stats(String),

    #[error("feature layout mismatch: {0}")]
    Remap(String),

    #[error("rule fitting error: {0}")]
    Fit(String),

    #[error("training error: {0}")]
    Training(String),

    #[error("input error: {0}")]
    Input(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Exit code the CLI maps this error to (2 = config, 3 = runtime).
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Input(_) => 2,
            _ => 3,
        }
    }
}
