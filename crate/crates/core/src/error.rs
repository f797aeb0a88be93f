use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("grid not antipodal: point {index} has no antipodal partner within 1e-9")]
    NotAntipodal { index: usize },

    #[error("point {index} is not unit norm (|p| = {norm})")]
    NotUnitNorm { index: usize, norm: f64 },

    #[error("jump angle {theta} unresolved by grid: admissible range is [{min}, {max}]")]
    ThetaUnresolved { theta: f64, min: f64, max: f64 },

    #[error("grid mismatch: expected grid {expected}, found {found}")]
    GridMismatch { expected: String, found: String },

    #[error("site index {index} out of range for grid with {len} sites")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("malformed file {path}: {message}")]
    Format { path: PathBuf, message: String },

    #[error("run interrupted after checkpoint; rerun with the same configuration to resume")]
    Interrupted,

    #[error(transparent)]
    Json(#[from] serde_json::Error),
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

    /// True for errors caused by bad input (arguments, files, configs) as
    /// opposed to failures while running.
    pub fn is_invalid_input(&self) -> bool {
        !matches!(self, Error::Io { .. } | Error::Interrupted)
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
