use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the simulator, learners and harness.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A configuration value failed validation.
    #[error("invalid config `{field}`: {message}")]
    Config { field: String, message: String },

    /// An action id or level index outside the configured action space.
    #[error("invalid action: {0}")]
    InvalidAction(String),

    /// Mismatched vector/matrix dimensions or network architectures.
    #[error("shape mismatch: {0}")]
    Shape(String),

    /// A caller broke an operation's contract (e.g. stepping a finished episode).
    #[error("contract violation: {0}")]
    Contract(String),

    /// Non-finite values where finite ones are required.
    #[error("non-finite value: {0}")]
    NonFinite(String),

    /// Replay buffer too small for the requested batch.
    #[error("insufficient replay: have {have}, need {need}")]
    InsufficientReplay { have: usize, need: usize },

    /// Exhaustive search refused because the joint action space is too large.
    #[error("joint action space of size {size} exceeds the oracle limit {limit}")]
    SearchTooLarge { size: u128, limit: u128 },

    #[error("malformed file {path}: {message}")]
    Format { path: PathBuf, message: String },

    #[error("config parse error in {path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors that stem from a bad configuration (CLI exit code 2).
    pub fn is_config_error(&self) -> bool {
        matches!(self, Error::Config { .. } | Error::Parse { .. })
    }
}

pub type Result<T> = std::result::Result<T, Error>;
