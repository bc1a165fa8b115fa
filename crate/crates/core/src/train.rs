//! Self-supervised training: the physical energy of the draped result is
//! the loss, minimised over the network weights and the learnable solver
//! scalars with Adam. No target positions enter anywhere.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use difftape::{Tape, Var};

use crate::body::Body;
use crate::error::{DrapeError, Result};
use crate::forces::{self, ops, ops::MaterialVars, DEFAULT_K_COLL};
use crate::gnn::{self, fingerprint, layout, Checkpoint, GnnConfig, GnnParams, GraphFeatures, OptimizerState};
use crate::mesh::{make_square_cloth, make_tube_garment};
use crate::pipeline::{drape_var, NetworkVars, PipelineConfig, Placement, PreparedScene, Scene, Toggles};
use crate::rest::MaterialParams;
use crate::solver::{softplus, SolverConfig, SolverVars};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossWeights {
    pub strain: f64,
    pub bend: f64,
    pub collision: f64,
    pub gravity: f64,
    /// Penalty on `|f̂ − F_int(X_pred)|²`, averaged over vertices.
    pub force_consistency: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights { strain: 1.0, bend: 1.0, collision: 1.0, gravity: 1.0, force_consistency: 0.0 }
    }
}

impl LossWeights {
    pub const ZERO: LossWeights = LossWeights { strain: 0.0, bend: 0.0, collision: 0.0, gravity: 0.0, force_consistency: 0.0 };

    fn all(&self) -> [f64; 5] {
        [self.strain, self.bend, self.collision, self.gravity, self.force_consistency]
    }
}

/// Ranges for procedural scenes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SceneBounds {
    pub sphere_radius: (f64, f64),
    pub capsule_radius: (f64, f64),
    /// Log-uniform range of the stiffness multiplier on the default fabric.
    pub stiffness: (f64, f64),
}

impl Default for SceneBounds {
    fn default() -> Self {
        SceneBounds { sphere_radius: (0.15, 0.35), capsule_radius: (0.1, 0.4), stiffness: (0.05, 0.5) }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub iterations: u64,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_epsilon: f64,
    /// Solver iterations inside the training pipeline.
    pub t_train: usize,
    /// Fixed training scenes drawn once from the seed.
    pub scenes: usize,
    /// Scenes per step, cycled through the fixed set.
    pub batch: usize,
    pub seed: u64,
    pub weights: LossWeights,
    pub gnn: GnnConfig,
    pub solver: SolverConfig,
    pub bounds: SceneBounds,
    pub k_coll: f64,
    pub log_every: u64,
    pub checkpoint_every: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            iterations: 2000,
            learning_rate: 5e-5,
            beta1: 0.9,
            beta2: 0.999,
            adam_epsilon: 1e-8,
            t_train: 3,
            scenes: 5,
            batch: 4,
            seed: 0,
            weights: LossWeights::default(),
            gnn: GnnConfig::default(),
            solver: SolverConfig::default(),
            bounds: SceneBounds::default(),
            k_coll: DEFAULT_K_COLL,
            log_every: 1,
            checkpoint_every: 500,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(DrapeError::Argument(m));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad(format!("learning rate must be positive, got {}", self.learning_rate));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) || !(self.adam_epsilon > 0.0) {
            return bad("moment coefficients must lie in [0, 1) and epsilon must be positive".into());
        }
        if self.weights.all().iter().any(|w| !(*w >= 0.0)) {
            return bad("loss weights must be non-negative".into());
        }
        if self.scenes == 0 || self.batch == 0 {
            return bad("scenes and batch must be at least 1".into());
        }
        if self.log_every == 0 {
            return bad("log_every must be at least 1".into());
        }
        self.gnn.validate()?;
        self.solver.validate()
    }

    /// Solver settings used inside training.
    pub fn train_solver(&self) -> SolverConfig {
        SolverConfig { iterations: self.t_train, ..self.solver }
    }

    /// Everything that shapes the loss curve except its length.
    pub fn describe(&self) -> String {
        format!(
            "lr={:?} betas={:?},{:?} eps={:?} t_train={} scenes={} batch={} seed={} weights={:?} gnn=[{}] solver={:?} bounds={:?} k_coll={:?}",
            self.learning_rate,
            self.beta1,
            self.beta2,
            self.adam_epsilon,
            self.t_train,
            self.scenes,
            self.batch,
            self.seed,
            self.weights.all(),
            self.gnn.describe(),
            SolverConfig { iterations: 0, ..self.solver },
            self.bounds,
            self.k_coll,
        )
    }

    pub fn fingerprint(&self) -> String {
        fingerprint(&self.describe())
    }
}

fn log_uniform(rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)) -> f64 {
    (rng.gen_range(lo.ln()..=hi.ln())).exp()
}

fn draw_scene(rng: &mut ChaCha8Rng, bounds: &SceneBounds) -> Result<Scene> {
    let material = MaterialParams::default().stiffened(log_uniform(rng, bounds.stiffness));
    if rng.gen_bool(0.5) {
        let (body, radius) = if rng.gen_bool(0.5) {
            let r = rng.gen_range(bounds.sphere_radius.0..=bounds.sphere_radius.1);
            (Body::sphere([0.0; 3], r)?, r)
        } else {
            let r = rng.gen_range(bounds.capsule_radius.0..=bounds.capsule_radius.1);
            let half = rng.gen_range(0.5..=1.5) * r;
            (Body::capsule([-half, 0.0, 0.0], [half, 0.0, 0.0], r)?, r)
        };
        let n = rng.gen_range(5..=8);
        let size = rng.gen_range(2.5..=3.5) * radius;
        let sink = rng.gen_range(0.2..=0.45) * radius;
        Ok(Scene {
            name: "sheet".into(),
            mesh: make_square_cloth(n, size)?,
            body,
            material,
            placement: Placement::Lift { sink },
        })
    } else {
        // a loop hung over a bar: the top of the loop starts pressed into the
        // bar and is pushed out, so the placement is stretched
        let r = rng.gen_range(bounds.capsule_radius.0..=bounds.capsule_radius.1);
        let tube_r = rng.gen_range(1.15..=1.6) * r;
        let tube_h = rng.gen_range(0.8..=1.6) * r;
        let half = 0.5 * tube_h + rng.gen_range(1.0..=2.0) * r;
        let nu = rng.gen_range(10..=16);
        let nv = rng.gen_range(3..=6);
        let mut mesh = make_tube_garment(tube_r, tube_h, nu, nv)?;
        for v in &mut mesh.vertices {
            *v = [v[1], -v[0], v[2]];
        }
        let sink = tube_r + rng.gen_range(0.1..=0.3) * r;
        Ok(Scene {
            name: "loop".into(),
            mesh,
            body: Body::capsule([-half, 0.0, 0.0], [half, 0.0, 0.0], r)?,
            material,
            placement: Placement::Lift { sink },
        })
    }
}

const SAMPLE_ATTEMPTS: usize = 100;

/// Draws a procedural scene whose initial placement clears the body,
/// resampling rejected draws.
pub fn sample_scene(rng: &mut ChaCha8Rng, bounds: &SceneBounds, solver: &SolverConfig) -> Result<PreparedScene> {
    let mut last = None;
    for _ in 0..SAMPLE_ATTEMPTS {
        let scene = draw_scene(rng, bounds)?;
        match PreparedScene::new(scene, solver) {
            Ok(p) => return Ok(p),
            Err(e @ DrapeError::Placement(_)) => last = Some(e),
            Err(e) => return Err(e),
        }
    }
    Err(last.unwrap_or_else(|| DrapeError::Placement("no scene sampled".into())))
}

/// Scene `index` of the set identified by `seed`; independent of how many
/// other scenes are drawn.
pub fn scene_set_member(seed: u64, index: u64, bounds: &SceneBounds, solver: &SolverConfig) -> Result<PreparedScene> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    let mut p = sample_scene(&mut rng, bounds, solver)?;
    p.scene.name = format!("{}_{seed}_{index}", p.scene.name);
    Ok(p)
}

pub fn scene_set(seed: u64, count: usize, bounds: &SceneBounds, solver: &SolverConfig) -> Result<Vec<PreparedScene>> {
    (0..count as u64).map(|i| scene_set_member(seed, i, bounds, solver)).collect()
}

/// Seed offset separating held-out scenes from training scenes.
pub const HELD_OUT_SEED_OFFSET: u64 = 0x5eed_0f_cafe;

/// A training scene with its network inputs.
#[derive(Debug, Clone)]
pub struct TrainScene {
    pub prep: PreparedScene,
    pub features: GraphFeatures,
}

impl TrainScene {
    pub fn new(prep: PreparedScene) -> Result<Self> {
        let features = prep.features_at(&prep.x_init)?;
        Ok(TrainScene { prep, features })
    }
}

/// Loss terms of one scene or averaged over a batch. `e_grav` is relative
/// to the initial placement.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LossTerms {
    pub loss: f64,
    pub e_strain: f64,
    pub e_bend: f64,
    pub e_coll: f64,
    pub e_grav: f64,
    pub consistency: f64,
}

impl LossTerms {
    fn add_scaled(&mut self, o: &LossTerms, s: f64) {
        self.loss += s * o.loss;
        self.e_strain += s * o.e_strain;
        self.e_bend += s * o.e_bend;
        self.e_coll += s * o.e_coll;
        self.e_grav += s * o.e_grav;
        self.consistency += s * o.consistency;
    }

    /// Weighted sum of the terms, for checking the reported decomposition.
    pub fn recombined(&self, w: &LossWeights) -> f64 {
        w.strain * self.e_strain + w.bend * self.e_bend + w.collision * self.e_coll + w.gravity * self.e_grav + w.force_consistency * self.consistency
    }
}

/// Records the weighted energy of `x` on the tape. The collision term is
/// taken at `x_contact`, the positions before projection: after it every
/// vertex clears the margin and the term would vanish.
#[allow(clippy::too_many_arguments)]
pub fn loss_var(
    tape: &mut Tape,
    x: Var,
    x_contact: Var,
    f_hat: Option<Var>,
    prep: &PreparedScene,
    mat_vars: &MaterialVars,
    weights: &LossWeights,
    margin: f64,
    k_coll: f64,
) -> Result<(Var, LossTerms)> {
    let mat = &prep.scene.material;
    let rest = &prep.rest;
    let es = ops::strain_energy_var(tape, x, mat_vars, rest, mat)?;
    let eb = ops::bend_energy_var(tape, x, mat_vars, rest, mat)?;
    let ec = ops::collision_energy_var(tape, x_contact, &prep.scene.body, margin, k_coll)?;
    let eg_abs = ops::gravity_energy_var(tape, x, mat_vars, rest, mat)?;
    let eg0 = tape.scalar_constant(forces::gravity_energy(&prep.x_init, rest, mat));
    let eg = tape.sub(eg_abs, eg0)?;

    let mut parts = vec![(weights.strain, es), (weights.bend, eb), (weights.collision, ec), (weights.gravity, eg)];
    let mut consistency = None;
    if weights.force_consistency > 0.0 {
        let f_hat = f_hat.ok_or_else(|| DrapeError::Argument("force consistency needs the network output".into()))?;
        let f = ops::internal_force_var(tape, x, mat_vars, rest, mat)?;
        let diff = tape.sub(f_hat, f)?;
        let sq = tape.mul(diff, diff)?;
        let per_vertex = tape.sum_cols(sq);
        let c = tape.mean(per_vertex);
        parts.push((weights.force_consistency, c));
        consistency = Some(c);
    }
    let mut total = tape.scalar_constant(0.0);
    for (w, v) in parts {
        let s = tape.scale(v, w);
        total = tape.add(total, s)?;
    }
    let terms = LossTerms {
        loss: tape.scalar(total),
        e_strain: tape.scalar(es),
        e_bend: tape.scalar(eb),
        e_coll: tape.scalar(ec),
        e_grav: tape.scalar(eg),
        consistency: consistency.map(|c| tape.scalar(c)).unwrap_or(0.0),
    };
    Ok((total, terms))
}

/// Flat gradient in checkpoint order: every parameter scalar, then
/// `log_eta_scale`, then `delta_raw`.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneGradient {
    pub terms: LossTerms,
    pub grad: Vec<f64>,
}

fn pipeline_for(cfg: &TrainConfig, ck: &Checkpoint) -> PipelineConfig {
    PipelineConfig {
        toggles: Toggles::default(),
        solver: SolverConfig { log_eta_scale: ck.log_eta_scale, delta_raw: ck.delta_raw, ..cfg.train_solver() },
        k_coll: cfg.k_coll,
    }
}

/// Loss of one scene and its gradient with respect to every learnable
/// scalar of `ck`.
pub fn scene_gradient(scene: &TrainScene, ck: &Checkpoint, cfg: &TrainConfig) -> Result<SceneGradient> {
    let pcfg = pipeline_for(cfg, ck);
    let mut tape = Tape::new();
    let params = gnn::record_params(&mut tape, &ck.params, true);
    let solver_vars = SolverVars::record(&mut tape, &pcfg.solver, true);
    let mat_vars = MaterialVars::record(&mut tape, &scene.prep.scene.material, false);
    let net = NetworkVars { features: &scene.features, params: &params, config: &ck.params.config };
    let out = drape_var(&mut tape, &scene.prep, &pcfg, Some(net), &mat_vars, &solver_vars)?;
    let (loss, terms) = loss_var(&mut tape, out.x_final, out.x_before_collision, out.f_hat, &scene.prep, &mat_vars, &cfg.weights, pcfg.solver.epsilon, cfg.k_coll)?;
    if !terms.loss.is_finite() {
        return Err(DrapeError::Argument(format!("non-finite loss on scene `{}`", scene.prep.scene.name)));
    }
    let grads = tape.backward(loss)?;
    let mut grad = Vec::with_capacity(ck.params.num_scalars() + 2);
    for v in &params {
        grad.extend(grads.get(*v).iter());
    }
    grad.push(grads.get(solver_vars.log_eta_scale)[(0, 0)]);
    grad.push(grads.get(solver_vars.delta_raw)[(0, 0)]);
    Ok(SceneGradient { terms, grad })
}

/// Batch mean of losses and gradients, accumulated in batch order.
pub fn batch_gradient(batch: &[&TrainScene], ck: &Checkpoint, cfg: &TrainConfig) -> Result<SceneGradient> {
    let mut per: Vec<Result<SceneGradient>> = Vec::with_capacity(batch.len());
    batch.par_iter().map(|s| scene_gradient(s, ck, cfg)).collect_into_vec(&mut per);
    let inv = 1.0 / batch.len() as f64;
    let mut terms = LossTerms::default();
    let mut grad = vec![0.0; ck.params.num_scalars() + 2];
    for r in per {
        let g = r?;
        terms.add_scaled(&g.terms, inv);
        for (a, b) in grad.iter_mut().zip(&g.grad) {
            *a += inv * b;
        }
    }
    Ok(SceneGradient { terms, grad })
}

/// Adam with bias correction on flat vectors.
pub fn adam_update(state: &mut OptimizerState, values: &mut [f64], grad: &[f64], lr: f64, beta1: f64, beta2: f64, eps: f64) {
    state.step += 1;
    let t = state.step as i32;
    let c1 = 1.0 - beta1.powi(t);
    let c2 = 1.0 - beta2.powi(t);
    for i in 0..values.len() {
        let g = grad[i];
        state.m[i] = beta1 * state.m[i] + (1.0 - beta1) * g;
        state.v[i] = beta2 * state.v[i] + (1.0 - beta2) * g * g;
        let m_hat = state.m[i] / c1;
        let v_hat = state.v[i] / c2;
        values[i] -= lr * m_hat / (v_hat.sqrt() + eps);
    }
}

fn trainable_mask(cfg: &GnnConfig) -> Vec<bool> {
    let mut mask = Vec::new();
    for s in layout(cfg) {
        mask.extend(std::iter::repeat(s.trainable).take(s.shape[0] * s.shape[1]));
    }
    mask.push(true);
    mask.push(true);
    mask
}

/// Fresh checkpoint: initial network, default solver scalars, zero moments.
pub fn initial_checkpoint(cfg: &TrainConfig, scenes: &[TrainScene]) -> Result<Checkpoint> {
    let samples: Vec<&GraphFeatures> = scenes.iter().map(|s| &s.features).collect();
    let params = GnnParams::init(cfg.gnn, cfg.seed, &samples)?;
    let len = params.num_scalars() + 2;
    Ok(Checkpoint {
        params,
        log_eta_scale: cfg.solver.log_eta_scale,
        delta_raw: cfg.solver.delta_raw,
        iteration: 0,
        fingerprint: cfg.fingerprint(),
        optimizer: Some(OptimizerState::zeros(len)),
    })
}

/// One Adam update from the mean batch loss. The input checkpoint is not
/// touched, so on error the caller still holds the last good state.
pub fn train_step(batch: &[&TrainScene], ck: &Checkpoint, cfg: &TrainConfig) -> Result<(Checkpoint, LossTerms, Vec<f64>)> {
    let g = batch_gradient(batch, ck, cfg)?;
    if !g.terms.loss.is_finite() || g.grad.iter().any(|v| !v.is_finite()) {
        return Err(DrapeError::Argument(format!("non-finite loss or gradient at iteration {}", ck.iteration)));
    }
    let mask = trainable_mask(&ck.params.config);
    let grad: Vec<f64> = g.grad.iter().zip(&mask).map(|(v, &m)| if m { *v } else { 0.0 }).collect();
    let mut values: Vec<f64> = ck.params.tensors.iter().flat_map(|t| t.iter().copied()).collect();
    values.push(ck.log_eta_scale);
    values.push(ck.delta_raw);
    let mut state = ck.optimizer.clone().unwrap_or_else(|| OptimizerState::zeros(values.len()));
    if state.m.len() != values.len() {
        return Err(DrapeError::Checkpoint(format!("optimizer state has {} entries, expected {}", state.m.len(), values.len())));
    }
    adam_update(&mut state, &mut values, &grad, cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.adam_epsilon);

    let mut next = ck.clone();
    let mut it = values.iter();
    for t in &mut next.params.tensors {
        for v in t.iter_mut() {
            *v = *it.next().unwrap() as f32 as f64;
        }
    }
    next.log_eta_scale = *it.next().unwrap();
    next.delta_raw = *it.next().unwrap();
    next.iteration += 1;
    next.optimizer = Some(state);
    Ok((next, g.terms, g.grad))
}

/// One line of the loss curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossRow {
    pub iteration: u64,
    pub terms: LossTerms,
    /// Multiplier `exp(log_eta_scale)` on each scene's base compliance.
    pub eta: f64,
    pub delta: f64,
}

pub const LOSS_CSV_HEADER: &str = "iteration,loss,e_strain,e_bend,e_coll,e_grav,eta,delta";

impl LossRow {
    pub fn csv(&self) -> String {
        let t = &self.terms;
        format!(
            "{},{:e},{:e},{:e},{:e},{:e},{:e},{:e}",
            self.iteration, t.loss, t.e_strain, t.e_bend, t.e_coll, t.e_grav, self.eta, self.delta
        )
    }
}

/// Batch `iteration` of the fixed scene set.
pub fn batch_indices(cfg: &TrainConfig, iteration: u64) -> Vec<usize> {
    (0..cfg.batch).map(|j| ((iteration as usize) * cfg.batch + j) % cfg.scenes).collect()
}

pub fn training_scenes(cfg: &TrainConfig) -> Result<Vec<TrainScene>> {
    scene_set(cfg.seed, cfg.scenes, &cfg.bounds, &cfg.train_solver())?.into_iter().map(TrainScene::new).collect()
}

/// Mean loss over all scenes at the checkpoint, without a gradient.
pub fn mean_scene_loss(scenes: &[TrainScene], ck: &Checkpoint, cfg: &TrainConfig) -> Result<LossTerms> {
    let pcfg = pipeline_for(cfg, ck);
    let mut terms = LossTerms::default();
    let inv = 1.0 / scenes.len() as f64;
    for s in scenes {
        let mut tape = Tape::new();
        let params = gnn::record_params(&mut tape, &ck.params, false);
        let sv = SolverVars::record(&mut tape, &pcfg.solver, false);
        let mv = MaterialVars::record(&mut tape, &s.prep.scene.material, false);
        let net = NetworkVars { features: &s.features, params: &params, config: &ck.params.config };
        let out = drape_var(&mut tape, &s.prep, &pcfg, Some(net), &mv, &sv)?;
        let (_, t) = loss_var(&mut tape, out.x_final, out.x_before_collision, out.f_hat, &s.prep, &mv, &cfg.weights, pcfg.solver.epsilon, cfg.k_coll)?;
        terms.add_scaled(&t, inv);
    }
    Ok(terms)
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub checkpoint: Checkpoint,
    pub curve: Vec<LossRow>,
    /// Largest absolute gradient seen for `log_eta_scale` and `delta_raw`.
    pub max_solver_grad: [f64; 2],
}

/// What to do with intermediate checkpoints.
pub trait CheckpointSink {
    fn save(&mut self, ck: &Checkpoint) -> Result<()>;
}

impl CheckpointSink for () {
    fn save(&mut self, _ck: &Checkpoint) -> Result<()> {
        Ok(())
    }
}

impl CheckpointSink for std::path::PathBuf {
    fn save(&mut self, ck: &Checkpoint) -> Result<()> {
        ck.save(self)
    }
}

/// Steps from `resume` (or a fresh start) up to `cfg.iterations`. The
/// last good checkpoint goes to `sink` periodically, at the end, and
/// before an error is returned.
pub fn train_loop(cfg: &TrainConfig, resume: Option<Checkpoint>, sink: &mut dyn CheckpointSink) -> Result<TrainOutcome> {
    cfg.validate()?;
    let scenes = training_scenes(cfg)?;
    let mut ck = match resume {
        Some(ck) => {
            if ck.fingerprint != cfg.fingerprint() {
                return Err(DrapeError::Checkpoint("checkpoint was produced by a different training configuration".into()));
            }
            if ck.params.config != cfg.gnn {
                return Err(DrapeError::Checkpoint("checkpoint network shape differs from the configuration".into()));
            }
            ck
        }
        None => initial_checkpoint(cfg, &scenes)?,
    };
    let mut curve = Vec::new();
    let mut max_solver_grad = [0.0f64; 2];
    while ck.iteration < cfg.iterations {
        let idx = batch_indices(cfg, ck.iteration);
        let batch: Vec<&TrainScene> = idx.iter().map(|&i| &scenes[i]).collect();
        let (next, terms, grad) = match train_step(&batch, &ck, cfg) {
            Ok(r) => r,
            Err(e) => {
                sink.save(&ck)?;
                return Err(e);
            }
        };
        let n = grad.len();
        max_solver_grad[0] = max_solver_grad[0].max(grad[n - 2].abs());
        max_solver_grad[1] = max_solver_grad[1].max(grad[n - 1].abs());
        if ck.iteration % cfg.log_every == 0 {
            let row = LossRow { iteration: ck.iteration, terms, eta: ck.log_eta_scale.exp(), delta: 1.0 + softplus(ck.delta_raw) };
            log::info!("{}", row.csv());
            curve.push(row);
        }
        ck = next;
        if cfg.checkpoint_every > 0 && ck.iteration % cfg.checkpoint_every == 0 {
            sink.save(&ck)?;
        }
    }
    sink.save(&ck)?;
    Ok(TrainOutcome { checkpoint: ck, curve, max_solver_grad })
}

/// Positions after the full pipeline with the checkpoint's learnable values.
pub fn checkpoint_solver(base: &SolverConfig, ck: &Checkpoint) -> SolverConfig {
    SolverConfig { log_eta_scale: ck.log_eta_scale, delta_raw: ck.delta_raw, ..*base }
}
