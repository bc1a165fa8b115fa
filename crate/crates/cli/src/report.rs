//! Output artifacts: metrics JSON, trace and loss CSV, timings.

use std::path::Path;

use drape_core::pipeline::{DrapeResult, StageTimings, Toggles};
use drape_core::solver::TraceRow;
use serde::Serialize;

use crate::error::{CliError, Result};

pub const SCHEMA_VERSION: u32 = 1;

pub const METRICS_FILE: &str = "metrics.json";
pub const TRACE_FILE: &str = "trace.csv";
pub const DRAPED_FILE: &str = "draped.obj";
pub const TIMINGS_FILE: &str = "timings.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ToggleFlags {
    pub use_gnn: bool,
    pub use_solver: bool,
    pub use_collision: bool,
}

impl From<Toggles> for ToggleFlags {
    fn from(t: Toggles) -> Self {
        ToggleFlags { use_gnn: t.use_gnn, use_solver: t.use_solver, use_collision: t.use_collision }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProjectionSummary {
    pub passes: usize,
    pub converged: bool,
}

/// Physical and geometric quality of one draped garment. Wall-clock
/// timings are kept out of this file so that it is reproducible.
#[allow(non_snake_case)]
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsReport {
    pub schema_version: u32,
    pub scene: String,
    pub seed: u64,
    pub toggles: ToggleFlags,
    pub vertices: usize,
    pub faces: usize,
    pub solver_iterations: usize,
    pub e_strain_J: f64,
    pub e_bend_J: f64,
    pub e_strain_per_area_J_m2: f64,
    pub e_bend_per_area_J_m2: f64,
    pub e_gravity_J: f64,
    pub e_collision_J: f64,
    pub b2g_percent: f64,
    pub residual_force_N: f64,
    pub min_distance_m: f64,
    pub eta_base: f64,
    pub projection: Option<ProjectionSummary>,
    pub warnings: Vec<String>,
}

impl MetricsReport {
    pub fn finite(&self) -> bool {
        [
            self.e_strain_J,
            self.e_bend_J,
            self.e_strain_per_area_J_m2,
            self.e_bend_per_area_J_m2,
            self.e_gravity_J,
            self.e_collision_J,
            self.b2g_percent,
            self.residual_force_N,
            self.min_distance_m,
            self.eta_base,
        ]
        .iter()
        .all(|v| v.is_finite())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StageMs {
    pub init: f64,
    pub gnn: f64,
    pub solver: f64,
    pub collision: f64,
    pub metrics: f64,
    pub total: f64,
}

impl From<StageTimings> for StageMs {
    fn from(t: StageTimings) -> Self {
        StageMs {
            init: t.init_ms,
            gnn: t.gnn_ms,
            solver: t.solver_ms,
            collision: t.collision_ms,
            metrics: t.metrics_ms,
            total: t.total_ms(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TimingsReport {
    pub schema_version: u32,
    pub runtime_ms: StageMs,
}

/// Mean and median over samples.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Spread {
    pub mean: f64,
    pub median: f64,
}

impl Spread {
    pub fn of(values: &[f64]) -> Spread {
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        let n = v.len();
        let median = if n == 0 {
            f64::NAN
        } else if n % 2 == 1 {
            v[n / 2]
        } else {
            0.5 * (v[n / 2 - 1] + v[n / 2])
        };
        Spread { mean: v.iter().sum::<f64>() / n as f64, median }
    }
}

pub fn trace_csv(trace: &[TraceRow]) -> String {
    let mut s = String::from("iteration,total_energy_J,total_force_N\n");
    for r in trace {
        s.push_str(&format!("{},{:e},{:e}\n", r.iteration, r.total_energy, r.total_force));
    }
    s
}

pub fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    std::fs::write(path, contents).map_err(|e| CliError::io(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).expect("report types serialize");
    text.push('\n');
    write_file(path, text)
}

pub fn create_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).map_err(|e| CliError::io(path, e))
}

pub fn metrics_report(scene: &str, seed: u64, toggles: Toggles, iterations: usize, faces: usize, r: &DrapeResult, min_distance: f64) -> MetricsReport {
    MetricsReport {
        schema_version: SCHEMA_VERSION,
        scene: scene.to_string(),
        seed,
        toggles: toggles.into(),
        vertices: r.x_final.len(),
        faces,
        solver_iterations: if toggles.use_solver { iterations } else { 0 },
        e_strain_J: r.metrics.e_strain,
        e_bend_J: r.metrics.e_bend,
        e_strain_per_area_J_m2: r.metrics.e_strain_per_area,
        e_bend_per_area_J_m2: r.metrics.e_bend_per_area,
        e_gravity_J: r.energies.e_grav,
        e_collision_J: r.energies.e_coll,
        b2g_percent: r.b2g_percent,
        residual_force_N: r.residual_force,
        min_distance_m: min_distance,
        eta_base: r.eta_base,
        projection: r.projection.map(|p| ProjectionSummary { passes: p.passes, converged: p.converged }),
        warnings: r.warnings.clone(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spread_of_odd_and_even_samples() {
        assert_eq!(Spread::of(&[3.0, 1.0, 2.0]), Spread { mean: 2.0, median: 2.0 });
        assert_eq!(Spread::of(&[4.0, 1.0, 2.0, 3.0]), Spread { mean: 2.5, median: 2.5 });
    }

    #[test]
    fn trace_has_header_and_rows() {
        let rows = [TraceRow { iteration: 0, total_energy: 1.5, total_force: 2.0 }, TraceRow { iteration: 1, total_energy: 1.0, total_force: 0.5 }];
        let csv = trace_csv(&rows);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines, ["iteration,total_energy_J,total_force_N", "0,1.5e0,2e0", "1,1e0,5e-1"]);
        assert_eq!(trace_csv(&[]).lines().count(), 1);
    }
}
