//! Explicit stretching solver and the body collision handler.

use std::sync::Arc;

use difftape::{Tape, Var};

use crate::body::{Body, BodyQuery};
use crate::error::{DrapeError, Result};
use crate::forces::{self, ops::MaterialVars};
use crate::geom::{self, Vec3};
use crate::rest::{MaterialParams, RestState};

/// Force magnitude at which a step is declared divergent.
pub const DIVERGENCE_FORCE: f64 = 1e6;

/// Slack on the separation test after projection.
pub const SEPARATION_SLACK: f64 = 1e-6;

pub fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// Inverse of [`softplus`] for positive arguments.
pub fn softplus_inv(y: f64) -> f64 {
    y + (-(-y).exp_m1()).ln()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub iterations: usize,
    /// Base compliance; calibrated from the scene when `None`.
    pub eta_base: Option<f64>,
    /// Learnable log multiplier on the base compliance.
    pub log_eta_scale: f64,
    pub gamma: f64,
    pub epsilon: f64,
    /// Learnable; the projection scalar is `1 + softplus(delta_raw)`.
    pub delta_raw: f64,
    pub max_projection_passes: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            iterations: 15,
            eta_base: None,
            log_eta_scale: 0.0,
            gamma: 0.95,
            epsilon: 2e-3,
            delta_raw: softplus_inv(0.05),
            max_projection_passes: 5,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(DrapeError::Argument(m));
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return bad(format!("solver gamma must lie in (0, 1], got {}", self.gamma));
        }
        if !(self.epsilon >= 0.0) {
            return bad(format!("collision margin must be non-negative, got {}", self.epsilon));
        }
        if let Some(e) = self.eta_base {
            if !(e > 0.0 && e.is_finite()) {
                return bad(format!("eta must be positive, got {e}"));
            }
        }
        if !self.log_eta_scale.is_finite() || !self.delta_raw.is_finite() {
            return bad("learnable solver parameters must be finite".into());
        }
        if self.max_projection_passes == 0 {
            return bad("max_projection_passes must be at least 1".into());
        }
        Ok(())
    }

    pub fn delta(&self) -> f64 {
        1.0 + softplus(self.delta_raw)
    }

    /// Step size at iteration `t`.
    pub fn step_size(&self, eta_base: f64, t: usize) -> f64 {
        self.log_eta_scale.exp() * (eta_base * self.gamma.powi(t as i32))
    }
}

/// Base compliance for a scene: the smaller of the step that moves the
/// most-loaded vertex by 1% of the bounding-box diagonal and the inverse
/// of the largest force-Jacobian eigenvalue.
pub fn calibrate_eta(x: &[Vec3], rest: &RestState, mat: &MaterialParams) -> Result<f64> {
    let f = forces::internal_force(x, rest, mat)?;
    let max_f = f.iter().map(|p| geom::norm(*p)).fold(0.0, f64::max);
    let (lo, hi) = geom::bounds(x);
    let diag = geom::norm(geom::sub(hi, lo));
    let by_displacement = if max_f > 0.0 { 0.01 * diag / max_f } else { f64::INFINITY };
    let lambda = forces::stiffness_bound(x, rest, mat, 40);
    let by_stability = if lambda > 0.0 { 1.0 / lambda } else { f64::INFINITY };
    let eta = by_displacement.min(by_stability);
    if eta.is_finite() && eta > 0.0 {
        Ok(eta)
    } else {
        Err(DrapeError::Argument("cannot calibrate eta on a force-free, stiffness-free state".into()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub iteration: usize,
    pub total_energy: f64,
    /// Euclidean norm of the stacked internal force vector.
    pub total_force: f64,
}

fn trace_row(iteration: usize, x: &[Vec3], f: &[Vec3], rest: &RestState, mat: &MaterialParams) -> TraceRow {
    let total_energy =
        forces::strain_energy(x, rest, mat) + forces::bend_energy(x, rest, mat) + forces::gravity_energy(x, rest, mat);
    TraceRow { iteration, total_energy, total_force: forces::field_norm(f) }
}

fn guard(f: &[Vec3], iteration: usize) -> Result<()> {
    let mut max_f: f64 = 0.0;
    for p in f {
        let n = geom::norm(*p);
        if !n.is_finite() {
            return Err(DrapeError::Divergence { iteration, max_force: f64::INFINITY });
        }
        max_f = max_f.max(n);
    }
    if max_f > DIVERGENCE_FORCE {
        return Err(DrapeError::Divergence { iteration, max_force: max_f });
    }
    Ok(())
}

/// `eta_hat · F_int(x)`.
pub fn stretch_increment(x: &[Vec3], rest: &RestState, mat: &MaterialParams, eta_hat: f64, iteration: usize) -> Result<Vec<Vec3>> {
    let f = forces::internal_force(x, rest, mat)?;
    guard(&f, iteration)?;
    Ok(f.iter().map(|p| geom::scale(*p, eta_hat)).collect())
}

/// One explicit step `x + eta_hat · F_int(x)`.
pub fn stretch_step(x: &[Vec3], rest: &RestState, mat: &MaterialParams, eta_hat: f64) -> Result<Vec<Vec3>> {
    let inc = stretch_increment(x, rest, mat, eta_hat, 0)?;
    Ok(x.iter().zip(&inc).map(|(a, b)| geom::add(*a, *b)).collect())
}

/// `cfg.iterations` steps with decaying step size. The trace holds one row
/// before every step and one after the last.
pub fn stretch_solve(
    x0: &[Vec3],
    rest: &RestState,
    mat: &MaterialParams,
    cfg: &SolverConfig,
    eta_base: f64,
) -> Result<(Vec<Vec3>, Vec<TraceRow>)> {
    let mut x = x0.to_vec();
    let mut trace = Vec::with_capacity(cfg.iterations + 1);
    for t in 0..=cfg.iterations {
        let f = forces::internal_force(&x, rest, mat)?;
        trace.push(trace_row(t, &x, &f, rest, mat));
        if t == cfg.iterations {
            break;
        }
        guard(&f, t)?;
        let eta = cfg.step_size(eta_base, t);
        for (p, fi) in x.iter_mut().zip(&f) {
            *p = geom::add(*p, geom::scale(*fi, eta));
        }
    }
    Ok((x, trace))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProjectionReport {
    /// Passes that moved at least one vertex.
    pub passes: usize,
    pub converged: bool,
    pub min_distance: f64,
}

fn min_d(q: &[BodyQuery]) -> f64 {
    q.iter().map(|q| q.d).fold(f64::INFINITY, f64::min)
}

/// One projection pass with frozen nearest points and normals.
pub fn project_pass(x: &[Vec3], frozen: &[BodyQuery], epsilon: f64, delta: f64) -> Vec<Vec3> {
    x.iter()
        .zip(frozen)
        .map(|(p, q)| {
            let d = geom::dot(geom::sub(*p, q.p), q.n);
            let push = (epsilon - d).max(0.0);
            geom::add(*p, geom::scale(geom::scale(q.n, push), delta))
        })
        .collect()
}

/// Pushes penetrating vertices out along the body normal, re-querying
/// between passes until every vertex clears the margin or the pass budget
/// runs out.
pub fn collide_project(x: &[Vec3], body: &Body, epsilon: f64, delta: f64, max_passes: usize) -> (Vec<Vec3>, ProjectionReport) {
    let mut x = x.to_vec();
    let mut passes = 0;
    loop {
        let q = body.batch_query(&x);
        let m = min_d(&q);
        if m >= epsilon - SEPARATION_SLACK || passes == max_passes {
            return (x, ProjectionReport { passes, converged: m >= epsilon - SEPARATION_SLACK, min_distance: m });
        }
        x = project_pass(&x, &q, epsilon, delta);
        passes += 1;
    }
}

/// Learnable solver scalars as tape nodes.
#[derive(Debug, Clone, Copy)]
pub struct SolverVars {
    pub log_eta_scale: Var,
    pub delta_raw: Var,
}

impl SolverVars {
    pub fn record(tape: &mut Tape, cfg: &SolverConfig, track: bool) -> Self {
        let mut put = |v: f64| if track { tape.leaf(difftape::scalar(v)) } else { tape.constant(difftape::scalar(v)) };
        SolverVars { log_eta_scale: put(cfg.log_eta_scale), delta_raw: put(cfg.delta_raw) }
    }
}

/// [`stretch_solve`] recorded on a tape. Trace is computed from the values.
#[allow(clippy::too_many_arguments)]
pub fn stretch_solve_var(
    tape: &mut Tape,
    x0: Var,
    rest: &Arc<RestState>,
    mat: &MaterialParams,
    mat_vars: &MaterialVars,
    solver: &SolverVars,
    cfg: &SolverConfig,
    eta_base: f64,
) -> Result<(Var, Vec<TraceRow>)> {
    let mut x = x0;
    let scale = tape.exp(solver.log_eta_scale);
    let mut trace = Vec::with_capacity(cfg.iterations + 1);
    for t in 0..=cfg.iterations {
        let f = forces::ops::internal_force_var(tape, x, mat_vars, rest, mat)?;
        let pts = geom::to_points(tape.value(x));
        let fv = geom::to_points(tape.value(f));
        trace.push(trace_row(t, &pts, &fv, rest, mat));
        if t == cfg.iterations {
            break;
        }
        guard(&fv, t)?;
        let eta = tape.scale(scale, eta_base * cfg.gamma.powi(t as i32));
        let step = tape.mul(f, eta)?;
        x = tape.add(x, step)?;
    }
    Ok((x, trace))
}

/// [`collide_project`] recorded on a tape, differentiable through the
/// ramp with the body frozen per pass.
pub fn collide_project_var(
    tape: &mut Tape,
    x0: Var,
    body: &Body,
    epsilon: f64,
    solver: &SolverVars,
    max_passes: usize,
) -> Result<(Var, ProjectionReport)> {
    let sp = tape.softplus(solver.delta_raw);
    let one = tape.scalar_constant(1.0);
    let delta = tape.add(one, sp)?;
    let eps = tape.scalar_constant(epsilon);
    let mut x = x0;
    let mut passes = 0;
    loop {
        let pts = geom::to_points(tape.value(x));
        let q = body.batch_query(&pts);
        let m = min_d(&q);
        if m >= epsilon - SEPARATION_SLACK || passes == max_passes {
            return Ok((x, ProjectionReport { passes, converged: m >= epsilon - SEPARATION_SLACK, min_distance: m }));
        }
        let p = tape.constant(geom::to_tensor(&q.iter().map(|q| q.p).collect::<Vec<_>>()));
        let n = tape.constant(geom::to_tensor(&q.iter().map(|q| q.n).collect::<Vec<_>>()));
        let rel = tape.sub(x, p)?;
        let proj = tape.mul(rel, n)?;
        let d = tape.sum_cols(proj);
        let gap = tape.sub(eps, d)?;
        let push = tape.relu(gap);
        let disp = tape.mul(push, n)?;
        let disp = tape.mul(disp, delta)?;
        x = tape.add(x, disp)?;
        passes += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{make_square_cloth, GarmentMesh};
    use crate::rest::build_rest_state;

    fn no_gravity() -> MaterialParams {
        MaterialParams { gravity: [0.0; 3], ..Default::default() }
    }

    #[test]
    fn softplus_roundtrip() {
        for y in [1e-3, 0.05, 1.0, 7.0] {
            assert!((softplus(softplus_inv(y)) - y).abs() < 1e-12 * y.max(1.0));
        }
        assert!((SolverConfig::default().delta() - 1.05).abs() < 1e-12);
    }

    #[test]
    fn rest_cloth_is_a_fixed_point() {
        // a single triangle has no rounding in its rest frame
        let m = GarmentMesh::new(vec![[0.0; 3], [1.0, 0.0, 0.0], [0.0, 0.0, -1.0]], vec![[0, 1, 2]], "t").unwrap();
        let r = build_rest_state(&m, &no_gravity()).unwrap();
        let x1 = stretch_step(&m.vertices, &r, &no_gravity(), 1e-3).unwrap();
        assert_eq!(x1, m.vertices);
        let cfg = SolverConfig { iterations: 7, ..Default::default() };
        let (xt, _) = stretch_solve(&m.vertices, &r, &no_gravity(), &cfg, 1e-3).unwrap();
        assert_eq!(xt, m.vertices);
    }

    #[test]
    fn gravity_only_step() {
        let m = GarmentMesh::new(vec![[0.0; 3], [1.0, 0.0, 0.0], [0.0, 0.0, -1.0]], vec![[0, 1, 2]], "t").unwrap();
        // vertex area 1/6, density 0.06 → 0.01 kg per vertex
        let mat = MaterialParams { density: 0.06, ..Default::default() };
        let r = build_rest_state(&m, &mat).unwrap();
        let x1 = stretch_step(&m.vertices, &r, &mat, 1e-3).unwrap();
        for (a, b) in x1.iter().zip(&m.vertices) {
            let d = geom::sub(*a, *b);
            assert!((d[1] + 9.81e-5).abs() < 1e-15 && d[0] == 0.0 && d[2] == 0.0);
        }
    }

    #[test]
    fn increment_is_linear_in_eta() {
        let m = make_square_cloth(4, 1.0).unwrap();
        let mat = MaterialParams::default();
        let r = build_rest_state(&m, &mat).unwrap();
        let x: Vec<Vec3> = m.vertices.iter().map(|p| [p[0] * 1.1, p[1] + 0.01 * p[0], p[2]]).collect();
        let a = stretch_increment(&x, &r, &mat, 1e-3, 0).unwrap();
        let b = stretch_increment(&x, &r, &mat, 2e-3, 0).unwrap();
        for (p, q) in a.iter().zip(&b) {
            for k in 0..3 {
                assert_eq!((2.0 * p[k]).to_bits(), q[k].to_bits());
            }
        }
    }

    #[test]
    fn zero_iterations_is_identity() {
        let m = make_square_cloth(3, 1.0).unwrap();
        let mat = MaterialParams::default();
        let r = build_rest_state(&m, &mat).unwrap();
        let cfg = SolverConfig { iterations: 0, ..Default::default() };
        let (x, trace) = stretch_solve(&m.vertices, &r, &mat, &cfg, 1e-3).unwrap();
        assert_eq!(x, m.vertices);
        assert_eq!(trace.len(), 1);
    }

    #[test]
    fn unit_decay_matches_repeated_steps() {
        let m = make_square_cloth(4, 1.0).unwrap();
        let mat = MaterialParams::default();
        let r = build_rest_state(&m, &mat).unwrap();
        let x0: Vec<Vec3> = m.vertices.iter().map(|p| [p[0] * 1.05, p[1], p[2] * 0.97]).collect();
        let cfg = SolverConfig { iterations: 6, gamma: 1.0, log_eta_scale: 0.3, ..Default::default() };
        let eta_base = 1e-3;
        let (xt, trace) = stretch_solve(&x0, &r, &mat, &cfg, eta_base).unwrap();
        assert_eq!(trace.len(), 7);
        let eta = cfg.step_size(eta_base, 0);
        let mut x = x0.clone();
        for _ in 0..6 {
            x = stretch_step(&x, &r, &mat, eta).unwrap();
        }
        assert_eq!(x, xt);
    }

    #[test]
    fn divergence_is_reported() {
        let m = make_square_cloth(3, 1.0).unwrap();
        let mat = MaterialParams::default();
        let r = build_rest_state(&m, &mat).unwrap();
        let x0: Vec<Vec3> = m.vertices.iter().map(|p| [p[0] * 1.5, p[1], p[2]]).collect();
        let cfg = SolverConfig { iterations: 50, gamma: 1.0, ..Default::default() };
        match stretch_solve(&x0, &r, &mat, &cfg, 10.0) {
            Err(DrapeError::Divergence { iteration, .. }) => assert!(iteration > 0),
            other => panic!("expected divergence, got {:?}", other.map(|_| ())),
        }
    }

    #[test]
    fn projection_examples() {
        let s = Body::sphere([0.0; 3], 1.0).unwrap();
        let (x, rep) = collide_project(&[[0.0, 0.5, 0.0]], &s, 0.002, 1.0, 5);
        assert!((x[0][1] - 1.002).abs() < 1e-15 && x[0][0] == 0.0 && x[0][2] == 0.0);
        assert!((s.query(x[0]).d - 0.002).abs() < 1e-15);
        assert_eq!(rep.passes, 1);
        assert!(rep.converged);

        let (x, _) = collide_project(&[[0.0, 0.5, 0.0]], &s, 0.002, 1.5, 1);
        assert!((x[0][1] - 1.253).abs() < 1e-12);

        let clear = vec![[0.0, 2.0, 0.0], [0.3, -1.4, 0.2]];
        let (x, rep) = collide_project(&clear, &s, 0.002, 1.3, 5);
        assert_eq!(x, clear);
        assert_eq!(rep.passes, 0);
    }

    #[test]
    fn half_space_single_pass_is_exact() {
        let h = Body::half_space([0.0, 0.25, 0.0], [0.0, 1.0, 0.0]).unwrap();
        let x = vec![[0.1, 0.0, 0.3], [0.4, 0.1, -0.2], [0.0, 0.9, 0.0]];
        let q = h.batch_query(&x);
        let y = project_pass(&x, &q, 0.01, 1.0);
        for (i, p) in y.iter().enumerate() {
            let d = h.query(*p).d;
            if i < 2 {
                assert!((d - 0.01).abs() < 1e-15);
            } else {
                assert_eq!(*p, x[i]);
            }
        }
    }

    #[test]
    fn projection_never_decreases_distance_on_convex_bodies() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        let bodies = [Body::sphere([0.0; 3], 0.5).unwrap(), Body::capsule([0.0, -0.3, 0.0], [0.0, 0.3, 0.1], 0.2).unwrap()];
        for body in &bodies {
            let x: Vec<Vec3> = (0..300).map(|_| [rng.gen_range(-0.7..0.7), rng.gen_range(-0.7..0.7), rng.gen_range(-0.7..0.7)]).collect();
            let q = body.batch_query(&x);
            let y = project_pass(&x, &q, 0.01, 1.2);
            for (a, b) in q.iter().zip(body.batch_query(&y)) {
                assert!(b.d >= a.d - 1e-12);
            }
            let (z, rep) = collide_project(&x, body, 0.01, 1.0, 5);
            assert!(rep.converged);
            assert!(body.batch_query(&z).iter().all(|q| q.d >= 0.01 - SEPARATION_SLACK));
        }
    }

    #[test]
    fn concave_trap_reports_without_failing() {
        // point inside the union of two spheres, each pass pushes it into the other
        let body = Body::composite(vec![Body::sphere([-0.05, 0.0, 0.0], 0.3).unwrap(), Body::sphere([0.05, 0.0, 0.0], 0.3).unwrap()]).unwrap();
        let (_, rep) = collide_project(&[[0.0, 0.0, 0.0]], &body, 0.001, 1.0, 1);
        assert_eq!(rep.passes, 1);
        assert!(rep.min_distance.is_finite());
    }

    #[test]
    fn tape_path_matches_plain_path() {
        let m = make_square_cloth(5, 0.6).unwrap();
        let mat = MaterialParams::default();
        let rest = Arc::new(build_rest_state(&m, &mat).unwrap());
        let x0: Vec<Vec3> = m.vertices.iter().map(|p| [p[0] * 1.04, 0.28 - 0.1 * p[2] * p[2], p[2]]).collect();
        let body = Body::sphere([0.0, 0.0, 0.0], 0.3).unwrap();
        let cfg = SolverConfig { iterations: 4, ..Default::default() };
        let eta = calibrate_eta(&x0, &rest, &mat).unwrap();
        let (xs, trace) = stretch_solve(&x0, &rest, &mat, &cfg, eta).unwrap();
        let (xp, rep) = collide_project(&xs, &body, cfg.epsilon, cfg.delta(), cfg.max_projection_passes);

        let mut tape = Tape::new();
        let xv = tape.constant(geom::to_tensor(&x0));
        let mv = MaterialVars::record(&mut tape, &mat, false);
        let sv = SolverVars::record(&mut tape, &cfg, true);
        let (ys, trace_t) = stretch_solve_var(&mut tape, xv, &rest, &mat, &mv, &sv, &cfg, eta).unwrap();
        assert_eq!(trace, trace_t);
        assert_eq!(geom::to_points(tape.value(ys)), xs);
        let (yp, rep_t) = collide_project_var(&mut tape, ys, &body, cfg.epsilon, &sv, cfg.max_projection_passes).unwrap();
        assert_eq!(rep.passes, rep_t.passes);
        let yp = geom::to_points(tape.value(yp));
        for (a, b) in xp.iter().zip(&yp) {
            assert!(geom::norm(geom::sub(*a, *b)) < 1e-12);
        }
    }
}
