use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the pipeline.
#[derive(Debug, Error)]
pub enum Error {
    /// A configuration value or input shape is unusable.
    #[error("configuration error: {0}")]
    Config(String),

    /// An API was called with arguments that violate its contract.
    #[error("usage error: {0}")]
    Usage(String),

    /// A data file could not be parsed.
    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    /// Loaded data is well-formed but inconsistent.
    #[error("validation error: {0}")]
    Validation(String),

    /// No token of a class name has an embedding.
    #[error("missing embedding for class '{0}': no token of the name is in the embedding table")]
    MissingEmbedding(String),

    /// A loss or gradient became NaN or infinite during training.
    #[error("non-finite {quantity} at training step {step}")]
    NonFinite { step: usize, quantity: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
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
