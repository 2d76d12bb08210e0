//! Crate-wide error type.

use std::path::PathBuf;

use thiserror::Error;

/// Errors surfaced by configuration, data handling, training, and reporting.
#[derive(Debug, Error)]
pub enum Error {
    /// Invalid or contradictory configuration; `key` names the offending entry.
    #[error("config error at `{key}`: {msg}")]
    Config { key: String, msg: String },

    /// Invalid data handed to an operation: bad shape, NaN, index out of range.
    #[error("data error: {0}")]
    Data(String),

    /// Filesystem access failed.
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// A text input could not be parsed; `line` is 1-based.
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    /// An operation was invoked in a state that cannot serve it.
    #[error("state error: {0}")]
    State(String),

    /// The requested metric has no defined value for these inputs.
    #[error("{0} is undefined for these inputs")]
    Undefined(&'static str),
}

impl Error {
    pub(crate) fn config(key: impl Into<String>, msg: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            msg: msg.into(),
        }
    }

    pub(crate) fn data(msg: impl Into<String>) -> Self {
        Error::Data(msg.into())
    }

    pub(crate) fn state(msg: impl Into<String>) -> Self {
        Error::State(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
