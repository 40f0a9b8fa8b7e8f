use std::path::PathBuf;

use thiserror::Error;

/// Errors raised across the reconstruction pipeline.
///
/// Variants are grouped so the command line can map them onto the three
/// failure classes it reports: configuration, data, and numeric.
#[derive(Debug, Error)]
pub enum Error {
    #[error("config: {0}")]
    Config(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("missing file: {}", .0.display())]
    MissingFile(PathBuf),

    #[error("malformed data in {}: {reason}", path.display())]
    Malformed { path: PathBuf, reason: String },

    #[error("pose {index} is not orthonormal (deviation {deviation:.3e})")]
    NonOrthonormalPose { index: usize, deviation: f64 },

    #[error("resolution mismatch: expected {expected:?}, found {found:?} in {what}")]
    ResolutionMismatch {
        expected: (usize, usize),
        found: (usize, usize),
        what: String,
    },

    #[error("degenerate bounds: {0}")]
    DegenerateBounds(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("empty input: {0}")]
    Empty(String),

    #[error("non-finite loss at iteration {iteration}: {detail}")]
    NonFinite { iteration: u64, detail: String },

    #[error("i/o error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("image error: {0}")]
    Image(#[from] image::ImageError),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

/// Failure class used for process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FailureClass {
    Config,
    Data,
    Numeric,
}

impl FailureClass {
    pub fn exit_code(self) -> i32 {
        match self {
            FailureClass::Config => 2,
            FailureClass::Data => 3,
            FailureClass::Numeric => 4,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            FailureClass::Config => "config",
            FailureClass::Data => "data",
            FailureClass::Numeric => "numeric",
        }
    }
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn malformed(path: impl Into<PathBuf>, reason: impl Into<String>) -> Self {
        Error::Malformed {
            path: path.into(),
            reason: reason.into(),
        }
    }

    pub fn class(&self) -> FailureClass {
        match self {
            Error::Config(_) | Error::InvalidArgument(_) => FailureClass::Config,
            Error::NonFinite { .. } => FailureClass::Numeric,
            _ => FailureClass::Data,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
