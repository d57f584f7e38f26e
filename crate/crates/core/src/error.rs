use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid basis spec {spec}: {reason}")]
    InvalidSpec { spec: String, reason: String },

    #[error("rank-deficient design for basis {spec} on a {grid_len}-point grid")]
    RankDeficient { spec: String, grid_len: usize },

    #[error("insufficient sample: need at least {needed}, got {got}")]
    InsufficientSample { needed: usize, got: usize },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("objective diverged at iteration {iteration} (value {value})")]
    Divergence { iteration: usize, value: f64 },

    #[error("fit failed at lambda = {lambda}: {source}")]
    AtLambda {
        lambda: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("fit failed at time index {index}: {source}")]
    AtTimeIndex {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("matrix is not positive definite: {0}")]
    NotPositiveDefinite(String),

    #[error("generation failed: {0}")]
    Generation(String),

    #[error("degenerate truth set: {0}")]
    DegenerateTruth(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            message: message.into(),
        }
    }

    /// True for failures caused by bad inputs rather than numerics.
    pub fn is_validation(&self) -> bool {
        match self {
            Error::InvalidArgument(_)
            | Error::InvalidSpec { .. }
            | Error::InsufficientSample { .. }
            | Error::Shape(_)
            | Error::GridMismatch(_)
            | Error::DegenerateTruth(_)
            | Error::Format { .. } => true,
            Error::AtLambda { source, .. } | Error::AtTimeIndex { source, .. } => {
                source.is_validation()
            }
            _ => false,
        }
    }
}
