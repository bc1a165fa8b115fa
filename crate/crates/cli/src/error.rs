use std::path::PathBuf;

use drape_core::DrapeError;
use thiserror::Error;

pub type Result<T, E = CliError> = std::result::Result<T, E>;

pub const EXIT_OK: i32 = 0;
/// Gradient checks or acceptance thresholds failed.
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_DIVERGENCE: i32 = 3;
pub const EXIT_IO: i32 = 4;

#[derive(Debug, Error)]
pub enum CliError {
    /// A configuration key is missing, malformed or out of range.
    #[error("{key}: {msg}")]
    Config { key: String, msg: String },
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    CheckFailed(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error(transparent)]
    Drape(#[from] DrapeError),
}

impl CliError {
    pub fn config(key: impl Into<String>, msg: impl Into<String>) -> Self {
        CliError::Config { key: key.into(), msg: msg.into() }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io { path: path.into(), source }
    }

    /// Process exit status for this error.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config { .. } => EXIT_VALIDATION,
            CliError::Io { .. } => EXIT_IO,
            CliError::CheckFailed(_) => EXIT_CHECK_FAILED,
            CliError::Numerical(_) => EXIT_DIVERGENCE,
            CliError::Drape(e) => match e {
                DrapeError::Divergence { .. } | DrapeError::NonFinite { .. } => EXIT_DIVERGENCE,
                DrapeError::Io { .. } => EXIT_IO,
                DrapeError::Tape(_) => EXIT_CHECK_FAILED,
                _ => EXIT_VALIDATION,
            },
        }
    }
}
