use std::path::PathBuf;

/// Errors raised across the pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Input data violates an invariant (non-finite samples, no valid frames, ...).
    #[error("rejected input: {0}")]
    InvalidInput(String),

    /// A parameter or configuration value is out of its allowed range.
    #[error("configuration error: {0}")]
    Config(String),

    /// The signal carries no usable information (zero variance, coincident landmarks).
    #[error("degenerate input: {0}")]
    Degenerate(String),

    /// Map, model or tensor dimensions do not agree.
    #[error("shape mismatch: {0}")]
    Shape(String),

    /// A file did not match its declared format.
    #[error("format error in {path}: {msg}")]
    Format { path: PathBuf, msg: String },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, msg: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            msg: msg.into(),
        }
    }
}
