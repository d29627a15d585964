use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the toolkit.
///
/// Variants are grouped by the exit-code family they map to in the CLI:
/// configuration, data, and numeric failures.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("image dimensions {height}x{width} are below the 16x16 minimum")]
    DegenerateImage { height: usize, width: usize },

    #[error("shape mismatch: expected {expected}, got {actual}")]
    ShapeMismatch { expected: String, actual: String },

    #[error("gaussian sigma {0} is not one of 0.1, 0.2, 0.4, 0.8")]
    InvalidSigma(f64),

    #[error("dataset error: {0}")]
    Dataset(String),

    #[error("missing ground-truth mask for defective image `{stem}` ({path})")]
    MissingMask { stem: String, path: PathBuf },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("cannot decode image {path}: {message}")]
    Decode { path: PathBuf, message: String },

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("AUC is undefined: {0}")]
    UndefinedAuc(String),

    #[error("non-finite loss at epoch {epoch}, batch {batch} (lr = {lr})")]
    NonFiniteLoss { epoch: usize, batch: usize, lr: f64 },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn shape(expected: impl ToString, actual: impl ToString) -> Self {
        Error::ShapeMismatch {
            expected: expected.to_string(),
            actual: actual.to_string(),
        }
    }

    /// Process exit code for this error: 2 config, 3 data, 4 numeric.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_)
            | Error::InvalidSigma(_)
            | Error::Checkpoint(_)
            | Error::Json(_)
            | Error::ShapeMismatch { .. } => 2,
            Error::DegenerateImage { .. }
            | Error::Dataset(_)
            | Error::MissingMask { .. }
            | Error::Io { .. }
            | Error::Decode { .. }
            | Error::UndefinedAuc(_) => 3,
            Error::NonFiniteLoss { .. } => 4,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
