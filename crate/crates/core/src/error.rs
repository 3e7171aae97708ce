use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Shapes or channel counts of two operands disagree.
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// A parameter is outside the domain of the operation (e.g. `r <= 0`).
    #[error("domain error: {0}")]
    Domain(String),

    /// An operation was configured in a way it cannot honour.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// User-provided data is missing, inconsistent or malformed.
    #[error("invalid input: {0}")]
    Input(String),

    /// The target node is not able to serve the request (e.g. a crashed edge).
    #[error("unavailable: {0}")]
    Unavailable(String),

    #[error("malformed file {path}: {reason}")]
    Format { path: PathBuf, reason: String },

    #[error("i/o error on {path}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Image(#[from] image::ImageError),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, reason: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            reason: reason.into(),
        }
    }
}
