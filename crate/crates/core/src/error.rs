use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the acquisition / recovery pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("file not found: {}", .0.display())]
    NotFound(PathBuf),

    #[error("i/o error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed header: {0}")]
    MalformedHeader(String),

    #[error("malformed payload: expected {expected} bytes, found {found}")]
    MalformedPayload { expected: usize, found: usize },

    #[error("unsupported bit depth: {0}")]
    UnsupportedBitDepth(String),

    #[error("unsupported format: {0}")]
    UnsupportedFormat(String),

    #[error("dimension mismatch: {left:?} vs {right:?} (width, height)")]
    DimensionMismatch {
        left: (usize, usize),
        right: (usize, usize),
    },

    #[error("image too small: {0}")]
    TooSmall(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("infeasible budget: {0}")]
    InfeasibleBudget(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        let path = path.into();
        if source.kind() == std::io::ErrorKind::NotFound {
            Error::NotFound(path)
        } else {
            Error::Io { path, source }
        }
    }

    /// True for failures of the optimizer itself rather than of its inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::Numerical(_))
    }

    pub(crate) fn mismatch(left: (usize, usize), right: (usize, usize)) -> Self {
        Error::DimensionMismatch { left, right }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
