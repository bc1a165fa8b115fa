use std::fmt::Write as _;
use std::path::PathBuf;

use drape_core::pipeline::{drape_prepared, DrapeResult, PipelineConfig, Toggles};
use drape_core::train::{checkpoint_solver, scene_set, HELD_OUT_SEED_OFFSET};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::RunConfig;
use crate::error::{CliError, Result};
use crate::report::{self, ToggleFlags, SCHEMA_VERSION};

pub const EVAL_JSON: &str = "eval.json";
pub const EVAL_CSV: &str = "eval.csv";

/// Means over the scene set for one stage combination.
#[allow(non_snake_case)]
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalRow {
    pub label: String,
    pub toggles: ToggleFlags,
    pub e_strain_J: f64,
    pub e_bend_J: f64,
    pub e_strain_per_area_J_m2: f64,
    pub e_bend_per_area_J_m2: f64,
    pub e_gravity_J: f64,
    pub b2g_percent: f64,
    pub residual_force_N: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct EvalTable {
    pub schema_version: u32,
    pub seed: u64,
    pub scenes: usize,
    pub solver_iterations: usize,
    pub rows: Vec<EvalRow>,
}

impl EvalTable {
    pub fn row(&self, t: Toggles) -> &EvalRow {
        let flags: ToggleFlags = t.into();
        self.rows.iter().find(|r| r.toggles == flags).expect("every combination is evaluated")
    }

    pub fn csv(&self) -> String {
        let mut s = String::from("configuration,e_strain_J,e_bend_J,e_strain_per_area_J_m2,e_bend_per_area_J_m2,e_gravity_J,b2g_percent,residual_force_N\n");
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{},{:e},{:e},{:e},{:e},{:e},{:e},{:e}",
                r.label, r.e_strain_J, r.e_bend_J, r.e_strain_per_area_J_m2, r.e_bend_per_area_J_m2, r.e_gravity_J, r.b2g_percent, r.residual_force_N
            );
        }
        s
    }

    pub fn pretty(&self) -> String {
        let mut s = format!("{:<24} {:>12} {:>12} {:>10} {:>12}\n", "configuration", "E_strain J", "E_bend J", "B2G %", "|F| N");
        for r in &self.rows {
            let _ = writeln!(s, "{:<24} {:>12.4e} {:>12.4e} {:>10.4} {:>12.4e}", r.label, r.e_strain_J, r.e_bend_J, r.b2g_percent, r.residual_force_N);
        }
        s
    }
}

#[derive(Debug, Clone)]
pub struct EvalRun {
    pub out_dir: PathBuf,
    pub table: EvalTable,
}

fn mean_row(t: Toggles, results: &[DrapeResult]) -> EvalRow {
    let n = results.len() as f64;
    let mean = |f: &dyn Fn(&DrapeResult) -> f64| results.iter().map(f).sum::<f64>() / n;
    EvalRow {
        label: t.label(),
        toggles: t.into(),
        e_strain_J: mean(&|r| r.metrics.e_strain),
        e_bend_J: mean(&|r| r.metrics.e_bend),
        e_strain_per_area_J_m2: mean(&|r| r.metrics.e_strain_per_area),
        e_bend_per_area_J_m2: mean(&|r| r.metrics.e_bend_per_area),
        e_gravity_J: mean(&|r| r.energies.e_grav),
        b2g_percent: mean(&|r| r.b2g_percent),
        residual_force_N: mean(&|r| r.residual_force),
    }
}

/// Runs all eight stage combinations over `eval.scenes` procedural scenes
/// drawn from a stream disjoint from training.
pub fn run(cfg: &RunConfig) -> Result<EvalRun> {
    let ck = super::load_checkpoint(cfg, Toggles::default())?.expect("checkpoint is required for the network rows");
    let tc = cfg.train()?;
    let solver = checkpoint_solver(&cfg.solver()?, &ck);
    let k_coll = cfg.k_coll()?;
    let count = cfg.eval_scenes()?;
    let out_dir = cfg.out_dir();
    super::ensure_out(&out_dir)?;

    let scenes = scene_set(cfg.seed() + HELD_OUT_SEED_OFFSET, count, &tc.bounds, &solver)?;
    let mut rows = Vec::with_capacity(8);
    for t in Toggles::all() {
        let pc = PipelineConfig { toggles: t, solver, k_coll };
        let results: Vec<DrapeResult> =
            scenes.par_iter().map(|s| drape_prepared(s, &pc, Some(&ck.params))).collect::<drape_core::Result<_>>()?;
        let row = mean_row(t, &results);
        if ![row.e_strain_J, row.e_bend_J, row.b2g_percent, row.residual_force_N].iter().all(|v| v.is_finite()) {
            return Err(CliError::Numerical(format!("non-finite metrics in configuration `{}`", row.label)));
        }
        rows.push(row);
    }
    let table = EvalTable { schema_version: SCHEMA_VERSION, seed: cfg.seed(), scenes: count, solver_iterations: solver.iterations, rows };
    report::write_json(&out_dir.join(EVAL_JSON), &table)?;
    report::write_file(&out_dir.join(EVAL_CSV), table.csv())?;
    Ok(EvalRun { out_dir, table })
}
