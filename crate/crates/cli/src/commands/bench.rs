use std::fmt::Write as _;
use std::time::Instant;

use drape_core::geom::Vec3;
use drape_core::mesh::make_square_cloth;
use drape_core::pipeline::{drape_pipeline, StageTimings};
use drape_core::rest::{build_rest_state, MaterialParams};
use drape_core::solver::{calibrate_eta, stretch_step};
use drape_core::train::checkpoint_solver;
use serde::Serialize;

use crate::config::{BenchSettings, RunConfig};
use crate::error::Result;
use crate::report::{self, Spread, SCHEMA_VERSION};

pub const BENCH_FILE: &str = "bench.json";

#[derive(Debug, Clone, Serialize)]
pub struct StageSpread {
    pub init: Spread,
    pub gnn: Spread,
    pub solver: Spread,
    pub collision: Spread,
    pub metrics: Spread,
    pub total: Spread,
}

impl StageSpread {
    fn of(samples: &[StageTimings]) -> Self {
        let pick = |f: fn(&StageTimings) -> f64| Spread::of(&samples.iter().map(f).collect::<Vec<_>>());
        StageSpread {
            init: pick(|t| t.init_ms),
            gnn: pick(|t| t.gnn_ms),
            solver: pick(|t| t.solver_ms),
            collision: pick(|t| t.collision_ms),
            metrics: pick(|t| t.metrics_ms),
            total: pick(|t| t.total_ms()),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchRow {
    #[serde(rename = "T")]
    pub iterations: usize,
    pub ms: StageSpread,
}

#[derive(Debug, Clone, Serialize)]
pub struct StepTiming {
    pub vertices: usize,
    pub ms: Spread,
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchReport {
    pub schema_version: u32,
    pub scene: String,
    pub samples: usize,
    pub warmup: usize,
    pub rows: Vec<BenchRow>,
    /// Median total per drape strictly increases with `T`.
    pub monotone_in_t: bool,
    pub stretch_step: Option<StepTiming>,
}

impl BenchReport {
    pub fn pretty(&self) -> String {
        let mut s = format!("scene {} ({} samples, {} warmup), mean / median ms\n", self.scene, self.samples, self.warmup);
        let _ = writeln!(s, "{:>5} {:>17} {:>17} {:>17} {:>17} {:>17} {:>17}", "T", "init", "gnn", "solver", "collision", "metrics", "total");
        let cell = |x: &Spread| format!("{:.3}/{:.3}", x.mean, x.median);
        for r in &self.rows {
            let m = &r.ms;
            let _ = writeln!(
                s,
                "{:>5} {:>17} {:>17} {:>17} {:>17} {:>17} {:>17}",
                r.iterations,
                cell(&m.init),
                cell(&m.gnn),
                cell(&m.solver),
                cell(&m.collision),
                cell(&m.metrics),
                cell(&m.total)
            );
        }
        let _ = writeln!(s, "monotone in T: {}", self.monotone_in_t);
        if let Some(st) = &self.stretch_step {
            let _ = writeln!(s, "stretch_step on {} vertices: mean {:.3} ms, median {:.3} ms", st.vertices, st.ms.mean, st.ms.median);
        }
        s
    }
}

/// Square cloth with at least `vertices` vertices, slightly rippled so all
/// force terms are active.
pub fn step_garment(vertices: usize) -> Result<(drape_core::rest::RestState, Vec<Vec3>, MaterialParams)> {
    let n = (vertices as f64).sqrt().ceil() as usize;
    let m = make_square_cloth(n, 2.0)?;
    let mat = MaterialParams::default();
    let rest = build_rest_state(&m, &mat)?;
    let x = m.vertices.iter().map(|p| [1.01 * p[0], 0.01 * (7.0 * p[0]).sin() * (5.0 * p[2]).cos(), p[2]]).collect();
    Ok((rest, x, mat))
}

/// Median and mean wall time of one explicit stretching step.
pub fn time_stretch_step(vertices: usize, samples: usize, warmup: usize) -> Result<StepTiming> {
    let (rest, x, mat) = step_garment(vertices)?;
    let eta = calibrate_eta(&x, &rest, &mat)?;
    for _ in 0..warmup {
        std::hint::black_box(stretch_step(&x, &rest, &mat, eta)?);
    }
    let mut ms = Vec::with_capacity(samples);
    for _ in 0..samples {
        let t = Instant::now();
        std::hint::black_box(stretch_step(&x, &rest, &mat, eta)?);
        ms.push(t.elapsed().as_secs_f64() * 1e3);
    }
    Ok(StepTiming { vertices: x.len(), ms: Spread::of(&ms) })
}

pub fn measure(cfg: &RunConfig, settings: &BenchSettings) -> Result<BenchReport> {
    let scene = cfg.scene()?;
    let mut pipeline = cfg.pipeline()?;
    let ck = super::load_checkpoint(cfg, pipeline.toggles)?;
    if let Some(ck) = &ck {
        pipeline.solver = checkpoint_solver(&pipeline.solver, ck);
    }
    let params = ck.as_ref().map(|c| &c.params);
    let mut iterations = settings.iterations.clone();
    iterations.sort_unstable();
    iterations.dedup();
    let mut rows = Vec::new();
    for &t in &iterations {
        let mut pc = pipeline;
        pc.solver.iterations = t;
        for _ in 0..settings.warmup {
            drape_pipeline(&scene, &pc, params)?;
        }
        let mut samples = Vec::with_capacity(settings.samples);
        for _ in 0..settings.samples {
            samples.push(drape_pipeline(&scene, &pc, params)?.timings);
        }
        rows.push(BenchRow { iterations: t, ms: StageSpread::of(&samples) });
    }
    let monotone_in_t = rows.windows(2).all(|w| w[1].ms.total.median > w[0].ms.total.median);
    let stretch_step = match settings.step_vertices {
        0 => None,
        v => Some(time_stretch_step(v, settings.samples, settings.warmup)?),
    };
    Ok(BenchReport {
        schema_version: SCHEMA_VERSION,
        scene: scene.name,
        samples: settings.samples,
        warmup: settings.warmup,
        rows,
        monotone_in_t,
        stretch_step,
    })
}

/// Times the configured scene at each `bench.T` and writes the table.
pub fn run(cfg: &RunConfig) -> Result<BenchReport> {
    let settings = cfg.bench()?;
    let out_dir = cfg.out_dir();
    super::ensure_out(&out_dir)?;
    let report = measure(cfg, &settings)?;
    report::write_json(&out_dir.join(BENCH_FILE), &report)?;
    Ok(report)
}
