//! Scene and run configuration: a TOML document with dotted sections,
//! e.g. `solver.T = 15` or a `[solver]` table.

use std::path::{Path, PathBuf};

use drape_core::body::Body;
use drape_core::gnn::GnnConfig;
use drape_core::mesh::{load_obj, make_square_cloth, make_tube_garment};
use drape_core::pipeline::{PipelineConfig, Placement, Scene, Toggles};
use drape_core::rest::MaterialParams;
use drape_core::solver::{softplus_inv, SolverConfig};
use drape_core::train::{LossWeights, SceneBounds, TrainConfig};
use drape_core::DrapeError;
use serde::Deserialize;

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub seed: Option<u64>,
    /// Output directory, relative to the working directory.
    pub out: Option<PathBuf>,
    /// Checkpoint directory, relative to the config file.
    pub checkpoint: Option<PathBuf>,
    pub garment: Option<GarmentSection>,
    pub body: Option<BodySection>,
    #[serde(default)]
    pub material: MaterialSection,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub pipeline: PipelineSection,
    #[serde(default)]
    pub train: TrainSection,
    #[serde(default)]
    pub eval: EvalSection,
    #[serde(default)]
    pub bench: BenchSection,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GarmentKind {
    Square,
    Tube,
    Obj,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlacementKind {
    Lift,
    CenterScale,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GarmentSection {
    pub kind: GarmentKind,
    pub name: Option<String>,
    pub path: Option<PathBuf>,
    /// Vertices per side of a square cloth.
    pub n: Option<usize>,
    pub size: Option<f64>,
    pub radius: Option<f64>,
    pub height: Option<f64>,
    pub nu: Option<usize>,
    pub nv: Option<usize>,
    pub placement: Option<PlacementKind>,
    /// Lift placement: garment mid-height below the body top, metres.
    pub sink: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BodyKind {
    Sphere,
    Capsule,
    Torso,
    Obj,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BodySection {
    pub kind: BodyKind,
    pub center: Option<[f64; 3]>,
    pub radius: Option<f64>,
    /// Capsule segment end points.
    pub a: Option<[f64; 3]>,
    pub b: Option<[f64; 3]>,
    pub height: Option<f64>,
    pub arm_radius: Option<f64>,
    pub arm_length: Option<f64>,
    pub path: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaterialSection {
    pub mu: Option<f64>,
    pub lambda: Option<f64>,
    pub k_bend: Option<f64>,
    pub density: Option<f64>,
    pub thickness: Option<f64>,
    pub gravity: Option<[f64; 3]>,
    /// Multiplier on mu, lambda and k_bend, applied after the overrides.
    pub stiffness: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    #[serde(rename = "T")]
    pub iterations: Option<usize>,
    pub gamma: Option<f64>,
    pub epsilon: Option<f64>,
    /// Projection scalar, at least 1.
    pub delta: Option<f64>,
    pub eta_base: Option<f64>,
    /// Multiplier on the base compliance.
    pub eta_scale: Option<f64>,
    pub max_projection_passes: Option<usize>,
    pub k_coll: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineSection {
    pub use_gnn: Option<bool>,
    pub use_solver: Option<bool>,
    pub use_collision: Option<bool>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightsSection {
    pub strain: Option<f64>,
    pub bend: Option<f64>,
    pub collision: Option<f64>,
    pub gravity: Option<f64>,
    pub force_consistency: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundsSection {
    pub sphere_radius: Option<(f64, f64)>,
    pub capsule_radius: Option<(f64, f64)>,
    pub stiffness: Option<(f64, f64)>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainSection {
    pub iterations: Option<u64>,
    pub learning_rate: Option<f64>,
    pub beta1: Option<f64>,
    pub beta2: Option<f64>,
    pub adam_epsilon: Option<f64>,
    #[serde(rename = "T")]
    pub t_train: Option<usize>,
    pub scenes: Option<usize>,
    pub batch: Option<usize>,
    pub latent: Option<usize>,
    pub blocks: Option<usize>,
    pub hidden_layers: Option<usize>,
    pub output_scale: Option<f64>,
    pub log_every: Option<u64>,
    pub checkpoint_every: Option<u64>,
    /// Checkpoint directory to continue from, relative to the config file.
    pub resume: Option<PathBuf>,
    #[serde(default)]
    pub weights: WeightsSection,
    #[serde(default)]
    pub bounds: BoundsSection,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalSection {
    pub scenes: Option<usize>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchSection {
    pub samples: Option<usize>,
    pub warmup: Option<usize>,
    #[serde(rename = "T")]
    pub iterations: Option<Vec<usize>>,
    /// Vertex count of the garment for the single-step timing; 0 skips it.
    pub step_vertices: Option<usize>,
}

/// Command-line overrides applied on top of the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
    /// `(key, value)` pairs such as `("gnn", "off")`.
    pub toggles: Vec<(String, String)>,
}

/// A parsed file together with the directory its relative paths refer to.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub file: ConfigFile,
    pub base_dir: PathBuf,
}

impl RunConfig {
    pub fn parse(text: &str, base_dir: impl Into<PathBuf>) -> Result<Self> {
        let file: ConfigFile = toml::from_str(text).map_err(|e| CliError::config("config", e.to_string().trim_end().to_string()))?;
        Ok(RunConfig { file, base_dir: base_dir.into() })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => CliError::config("--config", format!("file not found: {}", path.display())),
            _ => CliError::io(path, e),
        })?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::parse(&text, base).map_err(|e| match e {
            CliError::Config { msg, .. } => CliError::config(path.display().to_string(), msg),
            other => other,
        })
    }

    /// Empty document; every section takes its defaults.
    pub fn empty() -> Self {
        RunConfig { file: ConfigFile::default(), base_dir: PathBuf::from(".") }
    }

    pub fn apply(&mut self, o: &Overrides) -> Result<()> {
        if let Some(s) = o.seed {
            self.file.seed = Some(s);
        }
        if let Some(out) = &o.out {
            self.file.out = Some(out.clone());
        }
        if let Some(ck) = &o.checkpoint {
            // given on the command line, so relative to the working directory
            self.file.checkpoint = Some(std::path::absolute(ck).map_err(|e| CliError::io(ck, e))?);
        }
        for (key, value) in &o.toggles {
            let on = parse_switch(value).ok_or_else(|| CliError::config(format!("--toggle {key}"), format!("expected on/off, got `{value}`")))?;
            let p = &mut self.file.pipeline;
            match key.trim_start_matches("use_") {
                "gnn" => p.use_gnn = Some(on),
                "solver" => p.use_solver = Some(on),
                "collision" => p.use_collision = Some(on),
                _ => return Err(CliError::config(format!("--toggle {key}"), "unknown stage; expected gnn, solver or collision")),
            }
        }
        Ok(())
    }

    pub fn seed(&self) -> u64 {
        self.file.seed.unwrap_or(0)
    }

    pub fn out_dir(&self) -> PathBuf {
        self.file.out.clone().unwrap_or_else(|| PathBuf::from("out"))
    }

    fn input_path(&self, key: &str, p: &Path) -> Result<PathBuf> {
        let full = self.base_dir.join(p);
        if !full.exists() {
            return Err(CliError::config(key, format!("file not found: {}", full.display())));
        }
        Ok(full)
    }

    pub fn checkpoint_path(&self) -> Result<Option<PathBuf>> {
        self.file.checkpoint.as_ref().map(|p| self.input_path("checkpoint", p)).transpose()
    }

    pub fn toggles(&self) -> Toggles {
        let p = &self.file.pipeline;
        Toggles {
            use_gnn: p.use_gnn.unwrap_or(false),
            use_solver: p.use_solver.unwrap_or(true),
            use_collision: p.use_collision.unwrap_or(true),
        }
    }

    pub fn material(&self) -> Result<MaterialParams> {
        let s = &self.file.material;
        let d = MaterialParams::default();
        let mut m = MaterialParams {
            mu: s.mu.unwrap_or(d.mu),
            lambda: s.lambda.unwrap_or(d.lambda),
            k_bend: s.k_bend.unwrap_or(d.k_bend),
            density: s.density.unwrap_or(d.density),
            thickness: s.thickness.unwrap_or(d.thickness),
            gravity: s.gravity.unwrap_or(d.gravity),
        };
        if let Some(f) = s.stiffness {
            if !(f > 0.0 && f.is_finite()) {
                return Err(CliError::config("material.stiffness", format!("must be positive, got {f}")));
            }
            m = m.stiffened(f);
        }
        m.validate().map_err(|e| keyed("material", e))?;
        Ok(m)
    }

    pub fn solver(&self) -> Result<SolverConfig> {
        let s = &self.file.solver;
        let d = SolverConfig::default();
        let mut c = SolverConfig {
            iterations: s.iterations.unwrap_or(d.iterations),
            eta_base: s.eta_base.or(d.eta_base),
            gamma: s.gamma.unwrap_or(d.gamma),
            epsilon: s.epsilon.unwrap_or(d.epsilon),
            max_projection_passes: s.max_projection_passes.unwrap_or(d.max_projection_passes),
            ..d
        };
        if let Some(scale) = s.eta_scale {
            if !(scale > 0.0 && scale.is_finite()) {
                return Err(CliError::config("solver.eta_scale", format!("must be positive, got {scale}")));
            }
            c.log_eta_scale = scale.ln();
        }
        if let Some(delta) = s.delta {
            if !(delta > 1.0 && delta.is_finite()) {
                return Err(CliError::config("solver.delta", format!("must exceed 1, got {delta}")));
            }
            c.delta_raw = softplus_inv(delta - 1.0);
        }
        if let Some(e) = c.eta_base {
            if !(e > 0.0 && e.is_finite()) {
                return Err(CliError::config("solver.eta_base", format!("must be positive, got {e}")));
            }
        }
        c.validate().map_err(|e| keyed("solver", e))?;
        Ok(c)
    }

    pub fn k_coll(&self) -> Result<f64> {
        let k = self.file.solver.k_coll.unwrap_or(PipelineConfig::default().k_coll);
        if !(k > 0.0 && k.is_finite()) {
            return Err(CliError::config("solver.k_coll", format!("must be positive, got {k}")));
        }
        Ok(k)
    }

    pub fn pipeline(&self) -> Result<PipelineConfig> {
        Ok(PipelineConfig { toggles: self.toggles(), solver: self.solver()?, k_coll: self.k_coll()? })
    }

    pub fn scene(&self) -> Result<Scene> {
        let g = self.file.garment.as_ref().ok_or_else(|| CliError::config("garment", "section is required"))?;
        let b = self.file.body.as_ref().ok_or_else(|| CliError::config("body", "section is required"))?;
        let need = |key: &str, v: Option<f64>| v.ok_or_else(|| CliError::config(key, "value is required"));
        let need_n = |key: &str, v: Option<usize>| v.ok_or_else(|| CliError::config(key, "value is required"));

        let mesh = match g.kind {
            GarmentKind::Square => make_square_cloth(need_n("garment.n", g.n)?, need("garment.size", g.size)?).map_err(|e| keyed("garment", e))?,
            GarmentKind::Tube => make_tube_garment(
                need("garment.radius", g.radius)?,
                need("garment.height", g.height)?,
                need_n("garment.nu", g.nu)?,
                need_n("garment.nv", g.nv)?,
            )
            .map_err(|e| keyed("garment", e))?,
            GarmentKind::Obj => {
                let p = g.path.as_ref().ok_or_else(|| CliError::config("garment.path", "value is required"))?;
                load_obj(self.input_path("garment.path", p)?)?
            }
        };
        let placement = match g.placement.unwrap_or(match g.kind {
            GarmentKind::Tube => PlacementKind::CenterScale,
            _ => PlacementKind::Lift,
        }) {
            PlacementKind::CenterScale => Placement::CenterScale,
            PlacementKind::Lift => Placement::Lift { sink: g.sink.unwrap_or(0.0) },
        };

        let body = match b.kind {
            BodyKind::Sphere => Body::sphere(b.center.unwrap_or([0.0; 3]), need("body.radius", b.radius)?),
            BodyKind::Capsule => Body::capsule(
                b.a.ok_or_else(|| CliError::config("body.a", "value is required"))?,
                b.b.ok_or_else(|| CliError::config("body.b", "value is required"))?,
                need("body.radius", b.radius)?,
            ),
            BodyKind::Torso => Body::torso(
                need("body.radius", b.radius)?,
                need("body.height", b.height)?,
                need("body.arm_radius", b.arm_radius)?,
                need("body.arm_length", b.arm_length)?,
            ),
            BodyKind::Obj => {
                let p = b.path.as_ref().ok_or_else(|| CliError::config("body.path", "value is required"))?;
                let m = load_obj(self.input_path("body.path", p)?)?;
                Body::mesh(m.vertices, m.faces)
            }
        }
        .map_err(|e| keyed("body", e))?;

        let name = g.name.clone().unwrap_or_else(|| mesh.name.clone());
        Ok(Scene { name, mesh, body, material: self.material()?, placement })
    }

    pub fn train(&self) -> Result<TrainConfig> {
        let t = &self.file.train;
        let d = TrainConfig::default();
        let dg = GnnConfig::default();
        let dw = LossWeights::default();
        let db = SceneBounds::default();
        let w = &t.weights;
        let b = &t.bounds;
        let cfg = TrainConfig {
            iterations: t.iterations.unwrap_or(d.iterations),
            learning_rate: t.learning_rate.unwrap_or(d.learning_rate),
            beta1: t.beta1.unwrap_or(d.beta1),
            beta2: t.beta2.unwrap_or(d.beta2),
            adam_epsilon: t.adam_epsilon.unwrap_or(d.adam_epsilon),
            t_train: t.t_train.unwrap_or(d.t_train),
            scenes: t.scenes.unwrap_or(d.scenes),
            batch: t.batch.unwrap_or(d.batch),
            seed: self.seed(),
            weights: LossWeights {
                strain: w.strain.unwrap_or(dw.strain),
                bend: w.bend.unwrap_or(dw.bend),
                collision: w.collision.unwrap_or(dw.collision),
                gravity: w.gravity.unwrap_or(dw.gravity),
                force_consistency: w.force_consistency.unwrap_or(dw.force_consistency),
            },
            gnn: GnnConfig {
                latent: t.latent.unwrap_or(dg.latent),
                blocks: t.blocks.unwrap_or(dg.blocks),
                hidden_layers: t.hidden_layers.unwrap_or(dg.hidden_layers),
                output_scale: t.output_scale.unwrap_or(dg.output_scale),
            },
            solver: self.solver()?,
            bounds: SceneBounds {
                sphere_radius: b.sphere_radius.unwrap_or(db.sphere_radius),
                capsule_radius: b.capsule_radius.unwrap_or(db.capsule_radius),
                stiffness: b.stiffness.unwrap_or(db.stiffness),
            },
            k_coll: self.k_coll()?,
            log_every: t.log_every.unwrap_or(d.log_every),
            checkpoint_every: t.checkpoint_every.unwrap_or(d.checkpoint_every),
        };
        for (key, (lo, hi)) in [
            ("train.bounds.sphere_radius", cfg.bounds.sphere_radius),
            ("train.bounds.capsule_radius", cfg.bounds.capsule_radius),
            ("train.bounds.stiffness", cfg.bounds.stiffness),
        ] {
            if !(lo > 0.0 && lo <= hi && hi.is_finite()) {
                return Err(CliError::config(key, format!("expected 0 < low <= high, got [{lo}, {hi}]")));
            }
        }
        cfg.validate().map_err(|e| keyed("train", e))?;
        Ok(cfg)
    }

    pub fn resume_path(&self) -> Result<Option<PathBuf>> {
        self.file.train.resume.as_ref().map(|p| self.input_path("train.resume", p)).transpose()
    }

    pub fn eval_scenes(&self) -> Result<usize> {
        match self.file.eval.scenes.unwrap_or(30) {
            0 => Err(CliError::config("eval.scenes", "must be at least 1")),
            n => Ok(n),
        }
    }

    pub fn bench(&self) -> Result<BenchSettings> {
        let s = &self.file.bench;
        let out = BenchSettings {
            samples: s.samples.unwrap_or(100),
            warmup: s.warmup.unwrap_or(10),
            iterations: s.iterations.clone().unwrap_or_else(|| vec![3, 15]),
            step_vertices: s.step_vertices.unwrap_or(10_000),
        };
        if out.samples == 0 {
            return Err(CliError::config("bench.samples", "must be at least 1"));
        }
        if out.iterations.is_empty() {
            return Err(CliError::config("bench.T", "needs at least one iteration count"));
        }
        if out.step_vertices != 0 && out.step_vertices < 4 {
            return Err(CliError::config("bench.step_vertices", "must be 0 or at least 4"));
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchSettings {
    pub samples: usize,
    pub warmup: usize,
    pub iterations: Vec<usize>,
    pub step_vertices: usize,
}

fn parse_switch(v: &str) -> Option<bool> {
    match v.to_ascii_lowercase().as_str() {
        "on" | "true" | "1" | "yes" => Some(true),
        "off" | "false" | "0" | "no" => Some(false),
        _ => None,
    }
}

/// Validation failures from the core carry the section they came from.
fn keyed(key: &str, e: DrapeError) -> CliError {
    match e {
        DrapeError::Argument(msg) | DrapeError::Topology(msg) => CliError::config(key, msg),
        other => CliError::Drape(other),
    }
}

/// `key=value` from `--toggle`.
pub fn split_toggle(s: &str) -> Result<(String, String)> {
    let (k, v) = s.split_once('=').ok_or_else(|| CliError::config(format!("--toggle {s}"), "expected stage=on|off"))?;
    Ok((k.trim().to_string(), v.trim().to_string()))
}

#[cfg(test)]
mod tests;
