//! One module per subcommand. Each `run` writes its artifacts and returns
//! the in-memory results for callers that check them.

pub mod bench;
pub mod drape;
pub mod eval;
pub mod gen;
pub mod gradcheck;
pub mod train;

use std::path::Path;

use drape_core::gnn::Checkpoint;
use drape_core::pipeline::Toggles;

use crate::config::RunConfig;
use crate::error::{CliError, Result};

/// Checkpoint named by the config; required when the network stage runs.
pub(crate) fn load_checkpoint(cfg: &RunConfig, toggles: Toggles) -> Result<Option<Checkpoint>> {
    match cfg.checkpoint_path()? {
        Some(p) => Ok(Some(Checkpoint::load(&p, None)?)),
        None if toggles.use_gnn => Err(CliError::config("checkpoint", "required when the network stage is on")),
        None => Ok(None),
    }
}

pub(crate) fn min_body_distance(body: &drape_core::body::Body, x: &[drape_core::geom::Vec3]) -> f64 {
    body.batch_query(x).iter().map(|q| q.d).fold(f64::INFINITY, f64::min)
}

pub(crate) fn ensure_out(dir: &Path) -> Result<()> {
    crate::report::create_dir(dir)
}
