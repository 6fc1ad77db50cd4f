use std::io;
use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum LabError {
    #[error("config error: {0}")]
    Config(String),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
    #[error("{}: byte {offset}: {message}", path.display())]
    Format { path: PathBuf, offset: u64, message: String },
    #[error("check failed: {0}")]
    Check(String),
    #[error("internal error: {0}")]
    Internal(String),
}

pub type Result<T, E = LabError> = std::result::Result<T, E>;

impl LabError {
    pub fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        LabError::Io { path: path.into(), source }
    }

    /// Process exit status: 1 check failure, 2 configuration, 3 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            LabError::Check(_) | LabError::Internal(_) => 1,
            LabError::Config(_) => 2,
            LabError::Io { .. } | LabError::Format { .. } => 3,
        }
    }
}

impl From<dsn_core::Error> for LabError {
    fn from(e: dsn_core::Error) -> Self {
        match e {
            dsn_core::Error::Config(m) => LabError::Config(m),
            dsn_core::Error::Contract(m) => LabError::Internal(m),
        }
    }
}
