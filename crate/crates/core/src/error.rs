use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid dimensions {width}x{height}: {reason}")]
    Dimension {
        width: usize,
        height: usize,
        reason: &'static str,
    },

    #[error("dimension mismatch: {a:?} vs {b:?}")]
    DimensionMismatch {
        a: (usize, usize),
        b: (usize, usize),
    },

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),

    #[error("unknown class `{0}`")]
    UnknownClass(String),

    #[error("{path}:{line}:{column}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        column: usize,
        message: String,
    },

    #[error("validation failed: {0}")]
    Validation(String),

    #[error("polygon has no stroke pixels inside its area")]
    EmptyInterior,

    #[error("unsupported format `{0}`")]
    UnsupportedFormat(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Image {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },

    #[error("{0}")]
    Encode(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
