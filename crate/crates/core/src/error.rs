//! Crate-wide error type.

use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the crate.
#[derive(Debug, Error)]
pub enum Error {
    /// Dimension or hyperparameter constraints violated.
    #[error("configuration error: {0}")]
    Config(String),

    /// A parameter state violates a model invariant (e.g. nonpositive variance).
    #[error("invalid state: {0}")]
    InvalidState(String),

    /// Parameters outside a distribution's domain.
    #[error("domain error: {0}")]
    Domain(String),

    /// Linear-algebra failure that jitter escalation could not repair.
    #[error("numerical error: {context} (min eigenvalue estimate {min_eigenvalue:.3e})")]
    Numerical {
        context: String,
        min_eigenvalue: f64,
    },

    /// Feature representable in the data model but not supported by the sampler.
    #[error("unsupported feature: {0}")]
    Unsupported(String),

    /// Too few retained draws for the requested summary.
    #[error("insufficient samples: {0}")]
    InsufficientSamples(String),

    /// Malformed input file; `line` is 1-based (0 for file-level problems).
    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json error on {path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            message: message.into(),
        }
    }
}
