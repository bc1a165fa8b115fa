use std::path::PathBuf;

use difftape::TapeError;
use thiserror::Error;

pub type Result<T, E = DrapeError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum DrapeError {
    #[error("{path}:{line}: malformed record: {msg}")]
    Malformed { path: String, line: usize, msg: String },
    #[error("{path}:{line}: vertex index {index} out of range ({count} vertices)")]
    IndexOutOfRange {
        path: String,
        line: usize,
        index: i64,
        count: usize,
    },
    #[error("topology: {0}")]
    Topology(String),
    #[error("face {face} is degenerate (rest area {area:e} m^2)")]
    DegenerateFace { face: usize, area: f64 },
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("non-finite position at vertex {vertex}")]
    NonFinite { vertex: usize },
    #[error("solver diverged at iteration {iteration}: max |f| = {max_force:e} N")]
    Divergence { iteration: usize, max_force: f64 },
    #[error("placement infeasible: {0}")]
    Placement(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Tape(#[from] TapeError),
}

impl DrapeError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        DrapeError::Io { path: path.into(), source }
    }
}
