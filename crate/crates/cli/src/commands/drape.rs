use std::path::PathBuf;

use drape_core::mesh::save_obj;
use drape_core::pipeline::{drape_pipeline, DrapeResult, Scene};
use drape_core::train::checkpoint_solver;

use crate::config::RunConfig;
use crate::error::{CliError, Result};
use crate::report::{self, MetricsReport, TimingsReport, DRAPED_FILE, METRICS_FILE, SCHEMA_VERSION, TIMINGS_FILE, TRACE_FILE};

#[derive(Debug, Clone)]
pub struct DrapeOutcome {
    pub out_dir: PathBuf,
    pub scene: Scene,
    pub result: DrapeResult,
    pub report: MetricsReport,
}

/// Drapes the configured scene and writes the draped OBJ, metrics, solver
/// trace and stage timings into the output directory.
pub fn run(cfg: &RunConfig) -> Result<DrapeOutcome> {
    let scene = cfg.scene()?;
    let mut pipeline = cfg.pipeline()?;
    let ck = super::load_checkpoint(cfg, pipeline.toggles)?;
    if let Some(ck) = &ck {
        pipeline.solver = checkpoint_solver(&pipeline.solver, ck);
    }
    let out_dir = cfg.out_dir();
    super::ensure_out(&out_dir)?;

    let result = drape_pipeline(&scene, &pipeline, ck.as_ref().map(|c| &c.params))?;
    for w in &result.warnings {
        log::warn!("{w}");
    }
    let min_d = super::min_body_distance(&scene.body, &result.x_final);
    let report = report::metrics_report(&scene.name, cfg.seed(), pipeline.toggles, pipeline.solver.iterations, scene.mesh.faces.len(), &result, min_d);
    if !report.finite() {
        return Err(CliError::Numerical(format!("non-finite metrics for scene `{}`", scene.name)));
    }

    save_obj(&scene.mesh, &result.x_final, out_dir.join(DRAPED_FILE))?;
    report::write_json(&out_dir.join(METRICS_FILE), &report)?;
    report::write_file(&out_dir.join(TRACE_FILE), report::trace_csv(&result.trace))?;
    report::write_json(&out_dir.join(TIMINGS_FILE), &TimingsReport { schema_version: SCHEMA_VERSION, runtime_ms: result.timings.into() })?;
    Ok(DrapeOutcome { out_dir, scene, result, report })
}
