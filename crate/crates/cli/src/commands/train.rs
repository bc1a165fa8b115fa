use std::path::PathBuf;
use std::time::Instant;

use drape_core::gnn::Checkpoint;
use drape_core::solver::softplus;
use drape_core::train::{initial_checkpoint, mean_scene_loss, train_loop, training_scenes, TrainConfig, TrainOutcome, LOSS_CSV_HEADER};
use serde::Serialize;

use crate::config::RunConfig;
use crate::error::Result;
use crate::report::{self, SCHEMA_VERSION};

pub const CHECKPOINT_DIR: &str = "checkpoint";
pub const LOSS_FILE: &str = "loss.csv";
pub const SUMMARY_FILE: &str = "train.json";
pub const TIMINGS_FILE: &str = "train_timings.json";

#[derive(Debug, Clone, Serialize)]
pub struct TrainSummary {
    pub schema_version: u32,
    pub seed: u64,
    pub iterations: u64,
    pub fingerprint: String,
    /// Mean loss over the training scenes at the freshly initialised network.
    pub initial_loss: f64,
    pub final_loss: f64,
    pub eta_scale: f64,
    pub delta: f64,
    /// Largest absolute gradient seen for the compliance log scale.
    pub max_eta_gradient: f64,
    pub max_delta_gradient: f64,
}

#[derive(Debug, Clone)]
pub struct TrainRun {
    pub out_dir: PathBuf,
    pub config: TrainConfig,
    pub outcome: TrainOutcome,
    pub summary: TrainSummary,
    pub elapsed_s: f64,
}

/// Trains from scratch, or from `train.resume`, writing the checkpoint,
/// the loss curve and a summary.
pub fn run(cfg: &RunConfig) -> Result<TrainRun> {
    let tc = cfg.train()?;
    let resume = match cfg.resume_path()? {
        Some(p) => Some(Checkpoint::load(&p, Some(&tc.gnn))?),
        None => None,
    };
    let resumed = resume.is_some();
    let out_dir = cfg.out_dir();
    super::ensure_out(&out_dir)?;
    let start = Instant::now();
    let mut sink = out_dir.join(CHECKPOINT_DIR);
    let outcome = train_loop(&tc, resume, &mut sink)?;
    let elapsed_s = start.elapsed().as_secs_f64();

    let scenes = training_scenes(&tc)?;
    let initial = mean_scene_loss(&scenes, &initial_checkpoint(&tc, &scenes)?, &tc)?;
    let last = mean_scene_loss(&scenes, &outcome.checkpoint, &tc)?;
    let ck = &outcome.checkpoint;
    let summary = TrainSummary {
        schema_version: SCHEMA_VERSION,
        seed: tc.seed,
        iterations: ck.iteration,
        fingerprint: ck.fingerprint.clone(),
        initial_loss: initial.loss,
        final_loss: last.loss,
        eta_scale: ck.log_eta_scale.exp(),
        delta: 1.0 + softplus(ck.delta_raw),
        max_eta_gradient: outcome.max_solver_grad[0],
        max_delta_gradient: outcome.max_solver_grad[1],
    };

    let loss_path = out_dir.join(LOSS_FILE);
    let mut csv = if resumed && loss_path.exists() {
        std::fs::read_to_string(&loss_path).map_err(|e| crate::error::CliError::io(&loss_path, e))?
    } else {
        format!("{LOSS_CSV_HEADER}\n")
    };
    for row in &outcome.curve {
        csv.push_str(&row.csv());
        csv.push('\n');
    }
    report::write_file(&loss_path, csv)?;
    report::write_json(&out_dir.join(SUMMARY_FILE), &summary)?;
    report::write_json(&out_dir.join(TIMINGS_FILE), &serde_json::json!({ "schema_version": SCHEMA_VERSION, "elapsed_s": elapsed_s }))?;
    Ok(TrainRun { out_dir, config: tc, outcome, summary, elapsed_s })
}
