use std::path::PathBuf;

use thiserror::Error;

/// Errors raised while reading or validating a `.lgw` container.
///
/// Each variant has a stable numeric code (see [`LgwError::code`]) so that
/// tooling in other languages can match on failures without parsing text.
#[derive(Debug, Error)]
pub enum LgwError {
    #[error("bad magic: expected \"LGW1\", found {0:?}")]
    BadMagic([u8; 4]),
    #[error("truncated file: {0}")]
    Truncated(String),
    #[error("header is not valid JSON: {0}")]
    Header(String),
    #[error("missing tensor `{0}`")]
    MissingTensor(String),
    #[error("tensor `{name}` has shape {found:?}, spec requires {expected:?}")]
    ShapeMismatch {
        name: String,
        expected: Vec<usize>,
        found: Vec<usize>,
    },
    #[error("tensor `{name}` contains a non-finite value at element {index}")]
    NonFinite { name: String, index: usize },
    #[error("unsupported dtype `{0}` (only \"f32\" is defined)")]
    Dtype(String),
}

impl LgwError {
    pub fn code(&self) -> u32 {
        match self {
            LgwError::BadMagic(_) => 10,
            LgwError::Truncated(_) => 11,
            LgwError::Header(_) => 12,
            LgwError::MissingTensor(_) => 13,
            LgwError::ShapeMismatch { .. } => 14,
            LgwError::NonFinite { .. } => 15,
            LgwError::Dtype(_) => 16,
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid input: {0}")]
    Validation(String),
    #[error("index {index} out of range (limit {limit})")]
    IndexOutOfRange { index: usize, limit: usize },
    #[error("weight file: {0}")]
    Load(#[from] LgwError),
    #[error("wav: {0}")]
    Wav(String),
    #[error("correlation undefined: {0}")]
    UndefinedCorrelation(String),
    #[error("{solver} did not converge after {iterations} iterations")]
    NonConvergence {
        solver: &'static str,
        iterations: usize,
    },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by bad user input rather than internal failure.
    pub fn is_validation(&self) -> bool {
        !matches!(self, Error::Io { .. } | Error::NonConvergence { .. })
    }
}

pub type Result<T> = std::result::Result<T, Error>;
