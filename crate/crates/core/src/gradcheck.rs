//! Verification suites: finite differences of every force against its
//! energy, symmetry properties of the internal forces, and end-to-end
//! gradients of the training loss through the taped pipeline.

use std::sync::Arc;

use difftape::{Tape, TapeError, Tensor, Var};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub use difftape::gradcheck::CheckReport;

use crate::body::Body;
use crate::error::{DrapeError, Result};
use crate::forces::{self, kernels, ops::MaterialVars};
use crate::geom::{self, Vec3};
use crate::gnn::{self, layout, GnnConfig, GnnParams};
use crate::mesh::{make_square_cloth, make_tube_garment, GarmentMesh};
use crate::pipeline::{drape_var, NetworkVars, PipelineConfig, Placement, PreparedScene, Scene, Toggles};
use crate::rest::{build_rest_state, MaterialParams, RestState};
use crate::solver::{SolverConfig, SolverVars};
use crate::train::{loss_var, LossWeights};

pub const FORCE_STEP: f64 = 1e-6;
pub const FORCE_TOLERANCE: f64 = 1e-4;
pub const TRANSLATION_TOLERANCE: f64 = 1e-10;
pub const ROTATION_TOLERANCE: f64 = 1e-8;
/// Newtons.
pub const MOMENTUM_TOLERANCE: f64 = 1e-8;
/// Newtons.
pub const REST_TOLERANCE: f64 = 1e-8;
pub const END_TO_END_STEP: f64 = 1e-6;
pub const END_TO_END_TOLERANCE: f64 = 1e-3;

/// Named group of checks.
#[derive(Debug, Clone)]
pub struct Suite {
    pub name: String,
    pub checks: Vec<CheckReport>,
}

impl Suite {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed())
    }

    pub fn failures(&self) -> impl Iterator<Item = &CheckReport> {
        self.checks.iter().filter(|c| !c.passed())
    }

    /// Check with the largest error-to-tolerance ratio.
    pub fn worst(&self) -> Option<&CheckReport> {
        self.checks.iter().max_by(|a, b| (a.max_rel_err / a.tolerance).total_cmp(&(b.max_rel_err / b.tolerance)))
    }
}

fn report(name: String, err: f64, tolerance: f64) -> CheckReport {
    CheckReport { name, max_rel_err: err, tolerance }
}

fn max_abs(f: &[Vec3]) -> f64 {
    f.iter().flatten().fold(0.0, |a, v| a.max(v.abs()))
}

fn max_diff(a: &[Vec3], b: &[Vec3]) -> f64 {
    a.iter().flatten().zip(b.iter().flatten()).fold(0.0, |m, (p, q)| m.max((p - q).abs()))
}

/// A random garment of at most 50 vertices with an irregular rest shape,
/// its rest state and a deformed configuration.
pub struct RandomCase {
    pub mesh: GarmentMesh,
    pub material: MaterialParams,
    pub rest: RestState,
    pub x: Vec<Vec3>,
}

fn log_uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    rng.gen_range(lo.ln()..hi.ln()).exp()
}

pub fn random_case(rng: &mut ChaCha8Rng) -> Result<RandomCase> {
    let base = if rng.gen_bool(0.5) {
        make_square_cloth(rng.gen_range(3..=7), rng.gen_range(0.2..1.0))?
    } else {
        make_tube_garment(rng.gen_range(0.05..0.3), rng.gen_range(0.1..0.5), rng.gen_range(4..=10), rng.gen_range(2..=5))?
    };
    let spacing = base.edges().iter().map(|e| geom::norm(geom::sub(base.vertices[e[1]], base.vertices[e[0]]))).fold(f64::INFINITY, f64::min);
    let amp = 0.15 * spacing;
    let jitter = |p: Vec3, rng: &mut ChaCha8Rng| [p[0] + rng.gen_range(-amp..amp), p[1] + rng.gen_range(-amp..amp), p[2] + rng.gen_range(-amp..amp)];
    let rest_vertices: Vec<Vec3> = base.vertices.iter().map(|&p| jitter(p, rng)).collect();
    let mesh = GarmentMesh::new(rest_vertices, base.faces.clone(), base.name.clone())?;
    let material = MaterialParams {
        mu: log_uniform(rng, 1e3, 1e5),
        lambda: log_uniform(rng, 1e3, 1e5),
        k_bend: log_uniform(rng, 1e-6, 1e-3),
        density: rng.gen_range(0.1..0.6),
        ..Default::default()
    };
    let rest = build_rest_state(&mesh, &material)?.with_rest_angle(rng.gen_bool(0.5));
    let stretch = rng.gen_range(0.9..1.2);
    let rot = random_rotation(rng);
    let x = mesh.vertices.iter().map(|&p| jitter(geom::mat_vec(&rot, geom::scale(p, stretch)), rng)).collect();
    Ok(RandomCase { mesh, material, rest, x })
}

fn random_rotation(rng: &mut ChaCha8Rng) -> [[f64; 3]; 3] {
    let axis = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0f64)];
    let axis = geom::normalized(axis, 1e-6).unwrap_or([0.0, 0.0, 1.0]);
    geom::rotation(axis, rng.gen_range(0.0..std::f64::consts::TAU))
}

/// Worst central-difference mismatch between `force` and `−∇energy`,
/// relative to the largest force component.
pub fn force_error(energy: impl Fn(&[Vec3]) -> f64, force: &[Vec3], x: &[Vec3], h: f64) -> f64 {
    let scale = max_abs(force).max(1e-8);
    let mut work = x.to_vec();
    let mut worst: f64 = 0.0;
    for v in 0..x.len() {
        for c in 0..3 {
            let orig = work[v][c];
            work[v][c] = orig + h;
            let ep = energy(&work);
            work[v][c] = orig - h;
            let em = energy(&work);
            work[v][c] = orig;
            let fd = -(ep - em) / (2.0 * h);
            worst = worst.max((fd - force[v][c]).abs() / scale);
        }
    }
    worst
}

/// Strain, bending, gravity and contact forces against central
/// differences of their energies on `meshes` random garments.
pub fn force_suite(seed: u64, meshes: usize) -> Result<Suite> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut checks = Vec::with_capacity(4 * meshes);
    for k in 0..meshes {
        let case = random_case(&mut rng)?;
        let (x, rest, mat) = (&case.x, &case.rest, &case.material);
        let tag = format!("mesh {k} ({}, {} vertices)", case.mesh.name, x.len());

        let fs = forces::strain_forces(x, rest, mat)?;
        checks.push(report(format!("{tag} strain"), force_error(|y| forces::strain_energy(y, rest, mat), &fs, x, FORCE_STEP), FORCE_TOLERANCE));
        let fb = forces::bend_forces(x, rest, mat)?;
        checks.push(report(format!("{tag} bending"), force_error(|y| forces::bend_energy(y, rest, mat), &fb, x, FORCE_STEP), FORCE_TOLERANCE));
        let fg = forces::gravity_forces(rest, mat);
        checks.push(report(format!("{tag} gravity"), force_error(|y| forces::gravity_energy(y, rest, mat), &fg, x, FORCE_STEP), FORCE_TOLERANCE));

        // a ball under one vertex, so part of the garment is inside the
        // margin and part outside
        let (lo, hi) = geom::bounds(x);
        let size = geom::norm(geom::sub(hi, lo));
        let radius = rng.gen_range(0.2..0.5) * size;
        let anchor = x[rng.gen_range(0..x.len())];
        let body = Body::sphere(geom::sub(anchor, [0.0, radius - 0.01 * size, 0.0]), radius)?;
        let margin = 0.05 * size;
        let k_coll = forces::DEFAULT_K_COLL;
        let fc = forces::collision_forces_frozen(x, &body.batch_query(x), margin, k_coll);
        let err = force_error(|y| forces::collision_energy(y, &body, margin, k_coll), &fc, x, FORCE_STEP);
        checks.push(report(format!("{tag} contact"), err, FORCE_TOLERANCE));
    }
    Ok(Suite { name: "forces vs finite differences".into(), checks })
}

fn membrane_and_bending(x: &[Vec3], rest: &RestState, mat: &MaterialParams) -> Result<Vec<Vec3>> {
    let fs = forces::strain_forces(x, rest, mat)?;
    let fb = forces::bend_forces(x, rest, mat)?;
    Ok(fs.iter().zip(&fb).map(|(a, b)| geom::add(*a, *b)).collect())
}

/// Largest net force of a single face or hinge, in newtons.
fn element_momentum(x: &[Vec3], rest: &RestState, mat: &MaterialParams) -> f64 {
    let mut worst: f64 = 0.0;
    for (t, f) in rest.faces.iter().enumerate() {
        let p = [x[f[0]], x[f[1]], x[f[2]]];
        let (c, _) = kernels::strain_face(&p, &rest.dm_inv[t], rest.face_volume[t], mat.mu, mat.lambda);
        worst = worst.max(geom::norm(geom::add(geom::add(c[0], c[1]), c[2])));
    }
    for (h, hinge) in rest.hinges.iter().enumerate() {
        let s = hinge.stencil();
        let p = [x[s[0]], x[s[1]], x[s[2]], x[s[3]]];
        if let Some((c, _)) = kernels::bend_hinge(&p, rest.hinge_scale[h], mat.k_bend, rest.target_angle(h)) {
            worst = worst.max(geom::norm(c.iter().fold([0.0; 3], |a, v| geom::add(a, *v))));
        }
    }
    worst
}

/// Translation invariance, rotation equivariance, per-element and global
/// momentum balance of the internal forces, and zero force at rest, on
/// `cases` random garments.
pub fn invariance_suite(seed: u64, cases: usize) -> Result<Suite> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut checks = Vec::with_capacity(5 * cases);
    for k in 0..cases {
        let case = random_case(&mut rng)?;
        let (x, rest, mat) = (&case.x, &case.rest, &case.material);
        let f = membrane_and_bending(x, rest, mat)?;
        let scale = max_abs(&f).max(1.0);

        let t = [rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0)];
        let moved: Vec<Vec3> = x.iter().map(|p| geom::add(*p, t)).collect();
        let ft = membrane_and_bending(&moved, rest, mat)?;
        checks.push(report(format!("case {k} translation"), max_diff(&f, &ft) / scale, TRANSLATION_TOLERANCE));

        let rot = random_rotation(&mut rng);
        let turned: Vec<Vec3> = x.iter().map(|p| geom::mat_vec(&rot, *p)).collect();
        let fr = membrane_and_bending(&turned, rest, mat)?;
        let expected: Vec<Vec3> = f.iter().map(|v| geom::mat_vec(&rot, *v)).collect();
        checks.push(report(format!("case {k} rotation"), max_diff(&expected, &fr) / scale, ROTATION_TOLERANCE));

        checks.push(report(format!("case {k} element momentum (N)"), element_momentum(x, rest, mat), MOMENTUM_TOLERANCE));
        let net = f.iter().fold([0.0; 3], |a, v| geom::add(a, *v));
        checks.push(report(format!("case {k} global momentum (N)"), geom::norm(net), MOMENTUM_TOLERANCE));

        let at_rest = rest.clone().with_rest_angle(true);
        let f0 = membrane_and_bending(&case.mesh.vertices, &at_rest, mat)?;
        checks.push(report(format!("case {k} rest force (N)"), max_abs(&f0), REST_TOLERANCE));
    }
    Ok(Suite { name: "force invariances".into(), checks })
}

fn tape_error(e: DrapeError) -> TapeError {
    match e {
        DrapeError::Tape(t) => t,
        other => TapeError::Contract { op: "pipeline", msg: other.to_string() },
    }
}

/// The scene used for end-to-end checks: a slightly wavy 5×4 sheet just
/// above a floor. On a plane the frozen closest-point linearisation is
/// exact, so differences of the true pipeline check the taped gradient.
pub fn end_to_end_scene(solver: &SolverConfig) -> Result<PreparedScene> {
    let (nx, nz, step) = (5, 4, 0.1);
    let mut vertices = Vec::with_capacity(nx * nz);
    for j in 0..nz {
        for i in 0..nx {
            vertices.push([i as f64 * step, 0.0, j as f64 * step]);
        }
    }
    let mut faces = Vec::new();
    for j in 0..nz - 1 {
        for i in 0..nx - 1 {
            let a = j * nx + i;
            faces.push([a, a + nx, a + nx + 1]);
            faces.push([a, a + nx + 1, a + 1]);
        }
    }
    let mesh = GarmentMesh::new(vertices, faces, "sheet_5x4")?;
    let material = MaterialParams::default().stiffened(0.05);
    let rest = Arc::new(build_rest_state(&mesh, &material)?);
    let x_init: Vec<Vec3> = mesh
        .vertices
        .iter()
        .map(|p| [p[0], solver.epsilon + 1e-3 + 2e-3 * (7.0 * p[0]).sin() * (5.0 * p[2]).cos().abs(), p[2]])
        .collect();
    let eta_base = match solver.eta_base {
        Some(e) => e,
        None => crate::solver::calibrate_eta(&x_init, &rest, &material)?,
    };
    let scene = Scene {
        name: "gradcheck_sheet".into(),
        mesh,
        body: Body::half_space([0.0; 3], [0.0, 1.0, 0.0])?,
        material,
        placement: Placement::Lift { sink: 0.0 },
    };
    Ok(PreparedScene { scene, rest, x_init, eta_base })
}

/// Gradients of the training loss through network, solver and collision
/// stages with respect to the solver scalars, multipliers on the material
/// scalars, and the weights of a small network.
pub fn end_to_end_suite(seed: u64) -> Result<Suite> {
    end_to_end_checks(seed, Toggles::default(), &LossWeights { force_consistency: 0.1, ..Default::default() })
}

/// [`end_to_end_suite`] with chosen stages and loss weights.
pub fn end_to_end_checks(seed: u64, toggles: Toggles, weights: &LossWeights) -> Result<Suite> {
    let solver = SolverConfig { iterations: 4, ..Default::default() };
    let prep = end_to_end_scene(&solver)?;
    let features = prep.features_at(&prep.x_init)?;
    let config = GnnConfig { latent: 4, blocks: 2, hidden_layers: 2, output_scale: 0.01 };
    let params = GnnParams::randomized(config, seed, &[&features], 0.3)?;
    let slots = layout(&config);
    let trainable: Vec<usize> = (0..slots.len()).filter(|&k| slots[k].trainable).collect();
    let pcfg = PipelineConfig { toggles, solver, k_coll: forces::DEFAULT_K_COLL };
    let base = prep.scene.material;
    let prep = Arc::new(prep);

    let build = |tape: &mut Tape, v: &[Var]| -> std::result::Result<Var, TapeError> {
        let solver_vars = SolverVars { log_eta_scale: v[0], delta_raw: v[1] };
        let scaled = |tape: &mut Tape, m: Var, value: f64| {
            let c = tape.scalar_constant(value);
            tape.mul(m, c)
        };
        let mat_vars = MaterialVars {
            mu: scaled(tape, v[2], base.mu)?,
            lambda: scaled(tape, v[3], base.lambda)?,
            k_bend: scaled(tape, v[4], base.k_bend)?,
            density: scaled(tape, v[5], base.density)?,
        };
        let mut all: Vec<Var> = params.tensors.iter().map(|t| tape.constant(t.clone())).collect();
        for (j, &k) in trainable.iter().enumerate() {
            all[k] = v[6 + j];
        }
        let net = NetworkVars { features: &features, params: &all, config: &config };
        let out = drape_var(tape, &prep, &pcfg, Some(net), &mat_vars, &solver_vars).map_err(tape_error)?;
        let (loss, _) = loss_var(tape, out.x_final, out.x_before_collision, out.f_hat, &prep, &mat_vars, weights, solver.epsilon, pcfg.k_coll)
            .map_err(tape_error)?;
        Ok(loss)
    };

    let one = difftape::scalar(1.0);
    let mut inputs = vec![difftape::scalar(solver.log_eta_scale), difftape::scalar(solver.delta_raw), one.clone(), one.clone(), one.clone(), one];
    inputs.extend(trainable.iter().map(|&k| params.tensors[k].clone()));

    let mut checks = Vec::new();
    let groups: [(&str, Vec<usize>); 4] = [
        ("compliance", vec![0]),
        ("projection scalar", vec![1]),
        ("material multipliers", vec![2, 3, 4, 5]),
        ("network weights", (6..inputs.len()).collect()),
    ];
    for (name, which) in groups {
        let partial = |tape: &mut Tape, vars: &[Var]| -> std::result::Result<Var, TapeError> {
            let mut full: Vec<Var> = inputs.iter().map(|t| tape.constant(t.clone())).collect();
            for (j, &k) in which.iter().enumerate() {
                full[k] = vars[j];
            }
            build(tape, &full)
        };
        let subset: Vec<Tensor> = which.iter().map(|&k| inputs[k].clone()).collect();
        let r = difftape::gradcheck::check(&format!("loss wrt {name}"), &partial, &subset, END_TO_END_STEP, END_TO_END_TOLERANCE)?;
        checks.push(r);
    }
    Ok(Suite { name: "end-to-end loss gradients".into(), checks })
}

/// Gradient of the end-to-end loss with respect to the two solver scalars,
/// for checking that they take part in optimisation.
pub fn solver_scalar_gradient(seed: u64) -> Result<[f64; 2]> {
    let solver = SolverConfig { iterations: 4, ..Default::default() };
    let prep = end_to_end_scene(&solver)?;
    let features = prep.features_at(&prep.x_init)?;
    let config = GnnConfig { latent: 4, blocks: 2, hidden_layers: 2, output_scale: 0.01 };
    let params = GnnParams::randomized(config, seed, &[&features], 0.3)?;
    let pcfg = PipelineConfig { toggles: Toggles::default(), solver, k_coll: forces::DEFAULT_K_COLL };
    let mut tape = Tape::new();
    let pv = gnn::record_params(&mut tape, &params, false);
    let sv = SolverVars::record(&mut tape, &solver, true);
    let mv = MaterialVars::record(&mut tape, &prep.scene.material, false);
    let net = NetworkVars { features: &features, params: &pv, config: &config };
    let out = drape_var(&mut tape, &prep, &pcfg, Some(net), &mv, &sv)?;
    let (loss, _) = loss_var(&mut tape, out.x_final, out.x_before_collision, out.f_hat, &prep, &mv, &LossWeights::default(), solver.epsilon, pcfg.k_coll)?;
    let g = tape.backward(loss)?;
    Ok([g.get(sv.log_eta_scale)[(0, 0)], g.get(sv.delta_raw)[(0, 0)]])
}
