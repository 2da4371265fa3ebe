//! Error type shared across the crate.

use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the simulator.
#[derive(Debug, Error)]
pub enum Error {
    /// An input value that must be finite was NaN or infinite.
    #[error("{op}: non-finite input")]
    NonFinite { op: &'static str },

    /// A value outside the mathematical domain of an operation.
    #[error("{op}: {msg}")]
    Domain { op: &'static str, msg: String },

    /// An API misuse: valid values, wrong call sequence or shape.
    #[error("{op}: {msg}")]
    Usage { op: &'static str, msg: String },

    /// Weight vectors with incompatible layouts were combined.
    #[error("weight layout mismatch: expected hash {expected:#018x}, got {got:#018x}")]
    LayoutMismatch { expected: u64, got: u64 },

    /// A configuration field failed to parse or validate.
    #[error("config field `{field}`: {msg}")]
    Config { field: String, msg: String },

    /// Filesystem failure, with the path that caused it.
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn domain(op: &'static str, msg: impl Into<String>) -> Self {
        Error::Domain {
            op,
            msg: msg.into(),
        }
    }

    pub fn usage(op: &'static str, msg: impl Into<String>) -> Self {
        Error::Usage {
            op,
            msg: msg.into(),
        }
    }

    pub fn config(field: impl Into<String>, msg: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            msg: msg.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
