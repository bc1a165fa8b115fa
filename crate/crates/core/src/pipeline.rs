//! Initial placement, sample scenes and the full draping pipeline:
//! network refinement, stretching solve, collision projection, metrics.

use std::sync::Arc;
use std::time::Instant;

use difftape::{Tape, Var};

use crate::body::Body;
use crate::error::{DrapeError, Result};
use crate::forces::{self, ops::MaterialVars, EnergyBreakdown, EnergyMetrics, DEFAULT_K_COLL};
use crate::geom::{self, Vec3};
use crate::gnn::{self, GnnConfig, GnnParams, GraphFeatures};
use crate::mesh::{make_square_cloth, make_tube_garment, GarmentMesh};
use crate::rest::{build_rest_state, MaterialParams, RestState};
use crate::solver::{self, ProjectionReport, SolverConfig, SolverVars, TraceRow};

/// Which stages run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Toggles {
    pub use_gnn: bool,
    pub use_solver: bool,
    pub use_collision: bool,
}

impl Default for Toggles {
    fn default() -> Self {
        Toggles { use_gnn: true, use_solver: true, use_collision: true }
    }
}

impl Toggles {
    pub const NONE: Toggles = Toggles { use_gnn: false, use_solver: false, use_collision: false };

    /// All eight stage combinations, collision-only rows first.
    pub fn all() -> [Toggles; 8] {
        let mut out = [Toggles::NONE; 8];
        for (i, t) in out.iter_mut().enumerate() {
            *t = Toggles { use_gnn: i & 4 != 0, use_solver: i & 2 != 0, use_collision: i & 1 != 0 };
        }
        out
    }

    /// Short label such as `gnn+solver+collision` or `none`.
    pub fn label(&self) -> String {
        let parts: Vec<&str> = [(self.use_gnn, "gnn"), (self.use_solver, "solver"), (self.use_collision, "collision")]
            .iter()
            .filter(|(on, _)| *on)
            .map(|(_, n)| *n)
            .collect();
        if parts.is_empty() {
            "none".into()
        } else {
            parts.join("+")
        }
    }
}

/// How the garment is positioned relative to the body before draping.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Placement {
    /// Centre on the body and grow uniformly until every vertex clears the
    /// margin. Suited to garments that enclose the body.
    CenterScale,
    /// Centre horizontally over the body with the garment's mid-height
    /// `sink` metres below the body top, then push penetrating vertices
    /// out to the margin. Suited to sheets.
    Lift { sink: f64 },
}

const SCALE_GROWTH: f64 = 1.1;
const SCALE_ATTEMPTS: usize = 100;
const BISECTION_STEPS: usize = 40;
const LIFT_PASSES: usize = 50;

fn bbox_center(points: &[Vec3]) -> Vec3 {
    let (lo, hi) = geom::bounds(points);
    geom::scale(geom::add(lo, hi), 0.5)
}

fn min_distance(body: &Body, x: &[Vec3]) -> f64 {
    body.batch_query(x).iter().map(|q| q.d).fold(f64::INFINITY, f64::min)
}

/// Collision-free starting positions for `mesh` around `body`.
pub fn place_garment(mesh: &GarmentMesh, body: &Body, epsilon: f64, placement: Placement) -> Result<Vec<Vec3>> {
    let (lo, hi) = body
        .bbox()
        .ok_or_else(|| DrapeError::Placement("placement needs a bounded body".into()))?;
    let target = geom::scale(geom::add(lo, hi), 0.5);
    let c = bbox_center(&mesh.vertices);
    match placement {
        Placement::CenterScale => {
            let at = |s: f64| -> Vec<Vec3> {
                mesh.vertices.iter().map(|&v| geom::add(target, geom::scale(geom::sub(v, c), s))).collect()
            };
            let clear = |s: f64| min_distance(body, &at(s)) >= epsilon;
            if clear(1.0) {
                return Ok(at(1.0));
            }
            let mut lo_s = 1.0;
            let mut hi_s = None;
            let mut s = 1.0;
            for _ in 0..SCALE_ATTEMPTS {
                s *= SCALE_GROWTH;
                if clear(s) {
                    hi_s = Some(s);
                    break;
                }
                lo_s = s;
            }
            let mut hi_s = hi_s.ok_or_else(|| {
                DrapeError::Placement(format!("garment `{}` does not clear the body after {SCALE_ATTEMPTS} scale attempts", mesh.name))
            })?;
            for _ in 0..BISECTION_STEPS {
                let mid = 0.5 * (lo_s + hi_s);
                if clear(mid) {
                    hi_s = mid;
                } else {
                    lo_s = mid;
                }
            }
            Ok(at(hi_s))
        }
        Placement::Lift { sink } => {
            let (glo, ghi) = geom::bounds(&mesh.vertices);
            let mid_y = 0.5 * (glo[1] + ghi[1]);
            let shift = [target[0] - c[0], hi[1] - sink - mid_y, target[2] - c[2]];
            let x: Vec<Vec3> = mesh.vertices.iter().map(|&v| geom::add(v, shift)).collect();
            let (x, report) = solver::collide_project(&x, body, epsilon + 1e-9, 1.0, LIFT_PASSES);
            if report.min_distance < epsilon {
                return Err(DrapeError::Placement(format!(
                    "garment `{}` still {:.3e} m inside the margin after lifting",
                    mesh.name,
                    epsilon - report.min_distance
                )));
            }
            Ok(x)
        }
    }
}

/// A garment, a body and a material, with a placement rule.
#[derive(Debug, Clone)]
pub struct Scene {
    pub name: String,
    pub mesh: GarmentMesh,
    pub body: Body,
    pub material: MaterialParams,
    pub placement: Placement,
}

/// Soft square cloth pressed onto a ball.
pub fn sphere_drape_scene() -> Result<Scene> {
    Ok(Scene {
        name: "sphere_drape".into(),
        mesh: make_square_cloth(6, 1.0)?,
        body: Body::sphere([0.0, 0.0, 0.0], 0.3)?,
        material: MaterialParams::default().stiffened(0.1),
        placement: Placement::Lift { sink: 0.12 },
    })
}

/// Tube garment around a torso with arms.
pub fn capsule_drape_scene() -> Result<Scene> {
    Ok(Scene {
        name: "capsule_drape".into(),
        mesh: make_tube_garment(0.15, 0.5, 24, 8)?,
        body: Body::torso(0.16, 0.8, 0.06, 0.3)?,
        material: MaterialParams::default(),
        placement: Placement::CenterScale,
    })
}

/// A scene with its rest state, placement and solver calibration.
#[derive(Debug, Clone)]
pub struct PreparedScene {
    pub scene: Scene,
    pub rest: Arc<RestState>,
    pub x_init: Vec<Vec3>,
    /// Base compliance calibrated at the initial placement.
    pub eta_base: f64,
}

impl PreparedScene {
    pub fn new(scene: Scene, solver: &SolverConfig) -> Result<Self> {
        scene.material.validate()?;
        solver.validate()?;
        let rest = Arc::new(build_rest_state(&scene.mesh, &scene.material)?);
        let x_init = place_garment(&scene.mesh, &scene.body, solver.epsilon, scene.placement)?;
        let eta_base = match solver.eta_base {
            Some(e) => e,
            None => solver::calibrate_eta(&x_init, &rest, &scene.material)?,
        };
        Ok(PreparedScene { scene, rest, x_init, eta_base })
    }

    pub fn features_at(&self, x: &[Vec3]) -> Result<GraphFeatures> {
        gnn::build_features(x, &self.rest, &self.scene.material, &self.scene.body)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PipelineConfig {
    pub toggles: Toggles,
    pub solver: SolverConfig,
    /// Collision stiffness used for the reported collision energy.
    pub k_coll: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig { toggles: Toggles::default(), solver: SolverConfig::default(), k_coll: DEFAULT_K_COLL }
    }
}

/// Wall-clock milliseconds per stage.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StageTimings {
    pub init_ms: f64,
    pub gnn_ms: f64,
    pub solver_ms: f64,
    pub collision_ms: f64,
    pub metrics_ms: f64,
}

impl StageTimings {
    pub fn total_ms(&self) -> f64 {
        self.init_ms + self.gnn_ms + self.solver_ms + self.collision_ms + self.metrics_ms
    }
}

#[derive(Debug, Clone)]
pub struct DrapeResult {
    pub x_init: Vec<Vec3>,
    pub x_final: Vec<Vec3>,
    pub energies: EnergyBreakdown,
    pub metrics: EnergyMetrics,
    pub b2g_percent: f64,
    /// Euclidean norm of the stacked internal force vector at the result.
    pub residual_force: f64,
    pub trace: Vec<TraceRow>,
    pub projection: Option<ProjectionReport>,
    pub eta_base: f64,
    pub timings: StageTimings,
    pub warnings: Vec<String>,
}

fn ms(since: Instant) -> f64 {
    since.elapsed().as_secs_f64() * 1e3
}

/// Prepares `scene` and runs [`drape_prepared`], timing preparation as
/// the init stage.
pub fn drape_pipeline(scene: &Scene, cfg: &PipelineConfig, gnn: Option<&GnnParams>) -> Result<DrapeResult> {
    let start = Instant::now();
    let prep = PreparedScene::new(scene.clone(), &cfg.solver)?;
    let init_ms = ms(start);
    let mut out = drape_prepared(&prep, cfg, gnn)?;
    out.timings.init_ms = init_ms;
    Ok(out)
}

/// Network, then solver, then collision, each as enabled; metrics on the
/// result.
pub fn drape_prepared(prep: &PreparedScene, cfg: &PipelineConfig, gnn: Option<&GnnParams>) -> Result<DrapeResult> {
    let scene = &prep.scene;
    let mut timings = StageTimings::default();
    let mut warnings = Vec::new();
    let mut x = prep.x_init.clone();

    if cfg.toggles.use_gnn {
        let params = gnn.ok_or_else(|| DrapeError::Argument("use_gnn is set but no network parameters were given".into()))?;
        let t = Instant::now();
        let feats = prep.features_at(&x)?;
        x = gnn::gnn_forward(&feats, params)?.0;
        forces::check_finite(&x)?;
        timings.gnn_ms = ms(t);
    }

    let mut trace = Vec::new();
    if cfg.toggles.use_solver {
        let t = Instant::now();
        let (xs, tr) = solver::stretch_solve(&x, &prep.rest, &scene.material, &cfg.solver, prep.eta_base)?;
        x = xs;
        trace = tr;
        timings.solver_ms = ms(t);
    }

    let mut projection = None;
    if cfg.toggles.use_collision {
        let t = Instant::now();
        let (xc, report) = solver::collide_project(&x, &scene.body, cfg.solver.epsilon, cfg.solver.delta(), cfg.solver.max_projection_passes);
        if !report.converged {
            warnings.push(format!(
                "collision projection stopped after {} passes with min distance {:.3e} m (margin {:.3e} m)",
                report.passes, report.min_distance, cfg.solver.epsilon
            ));
        }
        x = xc;
        projection = Some(report);
        timings.collision_ms = ms(t);
    }

    let t = Instant::now();
    let degenerate = forces::degenerate_hinges(&x, &prep.rest);
    if degenerate > 0 {
        warnings.push(format!("{degenerate} hinges skipped on degenerate triangles"));
    }
    let energies = forces::energy_breakdown(&x, &prep.rest, &scene.material, &scene.body, cfg.solver.epsilon, cfg.k_coll);
    let metrics = forces::metric_energies(&x, &prep.rest, &scene.material);
    let b2g_percent = forces::metric_b2g(&x, &prep.rest, &scene.body);
    let residual_force = forces::field_norm(&forces::internal_force(&x, &prep.rest, &scene.material)?);
    timings.metrics_ms = ms(t);

    Ok(DrapeResult {
        x_init: prep.x_init.clone(),
        x_final: x,
        energies,
        metrics,
        b2g_percent,
        residual_force,
        trace,
        projection,
        eta_base: prep.eta_base,
        timings,
        warnings,
    })
}

/// Network inputs for the tape path.
#[derive(Debug, Clone, Copy)]
pub struct NetworkVars<'a> {
    pub features: &'a GraphFeatures,
    pub params: &'a [Var],
    pub config: &'a GnnConfig,
}

#[derive(Debug, Clone)]
pub struct TapedDrape {
    pub x_final: Var,
    /// Positions entering the collision stage (equal to `x_final` when it
    /// is off).
    pub x_before_collision: Var,
    pub f_hat: Option<Var>,
    pub trace: Vec<TraceRow>,
    pub projection: Option<ProjectionReport>,
}

/// The pipeline recorded on `tape` from the initial placement, so scalars
/// of the result can be differentiated with respect to the network
/// weights, the learnable solver scalars and the material.
pub fn drape_var(
    tape: &mut Tape,
    prep: &PreparedScene,
    cfg: &PipelineConfig,
    net: Option<NetworkVars<'_>>,
    mat_vars: &MaterialVars,
    solver_vars: &SolverVars,
) -> Result<TapedDrape> {
    let mut x = tape.constant(geom::to_tensor(&prep.x_init));
    let mut f_hat = None;
    if cfg.toggles.use_gnn {
        let net = net.ok_or_else(|| DrapeError::Argument("use_gnn is set but no network was recorded".into()))?;
        let out = gnn::gnn_forward_var(tape, net.features, net.params, net.config)?;
        x = out.x_pred;
        f_hat = Some(out.f_hat);
    }
    let mut trace = Vec::new();
    if cfg.toggles.use_solver {
        let (xs, tr) = solver::stretch_solve_var(tape, x, &prep.rest, &prep.scene.material, mat_vars, solver_vars, &cfg.solver, prep.eta_base)?;
        x = xs;
        trace = tr;
    }
    let x_before_collision = x;
    let mut projection = None;
    if cfg.toggles.use_collision {
        let (xc, report) =
            solver::collide_project_var(tape, x, &prep.scene.body, cfg.solver.epsilon, solver_vars, cfg.solver.max_projection_passes)?;
        x = xc;
        projection = Some(report);
    }
    Ok(TapedDrape { x_final: x, x_before_collision, f_hat, trace, projection })
}
