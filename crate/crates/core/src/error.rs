use std::path::PathBuf;

use thiserror::Error;

use crate::Vec3;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("config line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("shape mismatch: expected {expected} values, got {got}")]
    Shape { expected: usize, got: usize },

    #[error("singular map at stage {stage} near {x:?}: det = {det:e}")]
    SingularMap { stage: usize, x: Vec3, det: f64 },

    #[error("non-finite {what} at {x:?}")]
    NonFinite { what: &'static str, x: Vec3 },

    #[error("time {t} outside interpolation interval [{lo}, {hi}]")]
    TimeOutOfRange { t: f64, lo: f64, hi: f64 },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{}: {msg}", path.display())]
    Format { path: PathBuf, msg: String },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code for the batch tool: 2 for configuration problems,
    /// 3 for numerical aborts, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Parse { .. } | Error::Shape { .. } => 2,
            Error::SingularMap { .. } | Error::NonFinite { .. } | Error::TimeOutOfRange { .. } => 3,
            Error::Io { .. } | Error::Format { .. } => 1,
        }
    }
}
