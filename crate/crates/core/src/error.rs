use std::path::PathBuf;

use thiserror::Error;

/// Errors surfaced by the generator, codecs and detectors.
#[derive(Debug, Error)]
pub enum Error {
    /// A range whose limits sum to zero cannot be weight-scaled.
    #[error("degenerate range [{low}, {high}] for `{name}`: limits sum to zero")]
    DegenerateRange { name: String, low: f64, high: f64 },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: String, reason: String },

    #[error("inconsistent segment geometry: {0}")]
    Geometry(String),

    #[error("index {index} out of range for length {length}")]
    IndexOutOfRange { index: usize, length: usize },

    #[error("indices must be strictly increasing")]
    NotIncreasing,

    #[error("ROC-AUC is undefined: {0}")]
    UndefinedAuc(&'static str),

    #[error("malformed input {path}: {reason}")]
    Format { path: PathBuf, reason: String },

    #[error("{context}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn invalid(name: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name: name.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            context: context.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, reason: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            reason: reason.into(),
        }
    }

    /// True for failures caused by the filesystem rather than by the inputs.
    pub fn is_io(&self) -> bool {
        matches!(self, Error::Io { .. })
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
