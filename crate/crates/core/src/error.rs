use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape error: {0}")]
    Shape(String),

    #[error("validation error: {0}")]
    Validation(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("unreliable gradient oracle: {0}")]
    UnreliableOracle(String),

    #[error(
        "draw budget exhausted after {draws} draws: score class {class} holds {filled} of {target} pairs"
    )]
    BudgetExhausted {
        class: u8,
        filled: usize,
        target: usize,
        draws: u64,
    },

    #[error("training diverged: non-finite loss at epoch {epoch}, batch {batch}")]
    Divergence { epoch: usize, batch: usize },

    #[error("incompatible inputs: {0}")]
    Compatibility(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for errors caused by bad input or configuration rather than a
    /// failure while running.
    pub fn is_user_error(&self) -> bool {
        matches!(
            self,
            Error::Shape(_)
                | Error::Validation(_)
                | Error::Config(_)
                | Error::Parse { .. }
                | Error::Compatibility(_)
                | Error::Json(_)
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
