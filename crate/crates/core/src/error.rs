use std::io;
use std::path::PathBuf;

/// Errors produced by the analytic core, the simulator and the experiment harness.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// An argument lies outside the domain of the function it was passed to.
    #[error("domain error: {0}")]
    Domain(String),

    /// A configuration value is missing, malformed or out of range.
    #[error("invalid configuration `{key}`: {message}")]
    Config { key: String, message: String },

    /// A trace or config file could not be parsed.
    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            message: message.into(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
