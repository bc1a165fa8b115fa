//! Cloth forces and energies: StVK membrane strain, discrete-shell
//! bending, gravity and the body contact penalty, plus evaluation metrics.
//!
//! Every force field is assembled by computing per-element contributions
//! (in parallel) and then summing them per vertex over a precomputed
//! incidence list, so the result does not depend on the thread count.

pub mod kernels;
pub mod ops;
pub mod real;

use rayon::prelude::*;

use crate::body::{Body, BodyQuery};
use crate::error::{DrapeError, Result};
use crate::geom::{self, Vec3};
use crate::rest::{Incidence, MaterialParams, RestState};
use kernels::P3;
use real::{Dual, Real};

pub type ForceField = Vec<Vec3>;

/// Default contact penalty stiffness.
pub const DEFAULT_K_COLL: f64 = 1e3;

fn gather<T: Real, const K: usize>(num_vertices: usize, incidence: &Incidence, contrib: &[[P3<T>; K]]) -> Vec<P3<T>> {
    let mut out = Vec::with_capacity(num_vertices);
    (0..num_vertices)
        .into_par_iter()
        .map(|v| {
            let mut acc = [T::cst(0.0); 3];
            for &(e, slot) in incidence.of(v) {
                let c = contrib[e as usize][slot as usize];
                acc[0] += c[0];
                acc[1] += c[1];
                acc[2] += c[2];
            }
            acc
        })
        .collect_into_vec(&mut out);
    out
}

fn face_points<T: Copy>(x: &[P3<T>], f: &[usize; 3]) -> [P3<T>; 3] {
    [x[f[0]], x[f[1]], x[f[2]]]
}

/// Per-face strain contributions and energies.
fn strain_elements<T: Real>(x: &[P3<T>], rest: &RestState, mu: f64, lambda: f64, thickness: f64) -> Vec<([P3<T>; 3], T)> {
    let mut out = Vec::with_capacity(rest.faces.len());
    rest.faces
        .par_iter()
        .enumerate()
        .map(|(t, f)| kernels::strain_face(&face_points(x, f), &rest.dm_inv[t], rest.face_area[t] * thickness, mu, lambda))
        .collect_into_vec(&mut out);
    out
}

fn bend_elements<T: Real>(x: &[P3<T>], rest: &RestState, k: f64) -> Vec<Option<([P3<T>; 4], T)>> {
    let mut out = Vec::with_capacity(rest.hinges.len());
    rest.hinges
        .par_iter()
        .enumerate()
        .map(|(h, hinge)| {
            let s = hinge.stencil();
            let p = [x[s[0]], x[s[1]], x[s[2]], x[s[3]]];
            kernels::bend_hinge(&p, rest.hinge_scale[h], k, rest.target_angle(h))
        })
        .collect_into_vec(&mut out);
    out
}

pub(crate) fn strain_terms<T: Real>(x: &[P3<T>], rest: &RestState, mu: f64, lambda: f64, thickness: f64) -> (Vec<P3<T>>, T) {
    let el = strain_elements(x, rest, mu, lambda, thickness);
    let mut energy = T::cst(0.0);
    for (_, e) in &el {
        energy += *e;
    }
    let contrib: Vec<[P3<T>; 3]> = el.into_iter().map(|(f, _)| f).collect();
    (gather(rest.num_vertices, &rest.face_incidence, &contrib), energy)
}

pub(crate) fn bend_terms<T: Real>(x: &[P3<T>], rest: &RestState, k: f64) -> (Vec<P3<T>>, T, usize) {
    let el = bend_elements(x, rest, k);
    let mut energy = T::cst(0.0);
    let mut skipped = 0;
    let zero = [[T::cst(0.0); 3]; 4];
    let contrib: Vec<[P3<T>; 4]> = el
        .into_iter()
        .map(|c| match c {
            Some((f, e)) => {
                energy += e;
                f
            }
            None => {
                skipped += 1;
                zero
            }
        })
        .collect();
    (gather(rest.num_vertices, &rest.hinge_incidence, &contrib), energy, skipped)
}

/// Euclidean norm of a force field taken as one `3N` vector.
pub fn field_norm(f: &[Vec3]) -> f64 {
    f.iter().map(|p| geom::dot(*p, *p)).sum::<f64>().sqrt()
}

pub fn check_finite(x: &[Vec3]) -> Result<()> {
    match x.iter().position(|p| !p.iter().all(|v| v.is_finite())) {
        Some(vertex) => Err(DrapeError::NonFinite { vertex }),
        None => Ok(()),
    }
}

pub fn deformation_gradient(face: usize, x: &[Vec3], rest: &RestState) -> [Vec3; 2] {
    kernels::deformation_gradient(&face_points(x, &rest.faces[face]), &rest.dm_inv[face])
}

/// Green strain as a symmetric 2×2 matrix.
pub fn green_strain(f: &[Vec3; 2]) -> [[f64; 2]; 2] {
    let [g00, g01, g11] = kernels::green_strain(f);
    [[g00, g01], [g01, g11]]
}

pub fn strain_forces(x: &[Vec3], rest: &RestState, mat: &MaterialParams) -> Result<ForceField> {
    check_finite(x)?;
    Ok(strain_terms(x, rest, mat.mu, mat.lambda, mat.thickness).0)
}

pub fn strain_energy(x: &[Vec3], rest: &RestState, mat: &MaterialParams) -> f64 {
    strain_elements(x, rest, mat.mu, mat.lambda, mat.thickness).iter().map(|(_, e)| *e).sum()
}

/// Bending forces. Hinges with a collapsed wing contribute nothing; see
/// [`degenerate_hinges`].
pub fn bend_forces(x: &[Vec3], rest: &RestState, mat: &MaterialParams) -> Result<ForceField> {
    check_finite(x)?;
    Ok(bend_terms(x, rest, mat.k_bend).0)
}

pub fn bend_energy(x: &[Vec3], rest: &RestState, mat: &MaterialParams) -> f64 {
    bend_terms(x, rest, mat.k_bend).1
}

/// Number of hinges skipped because a wing triangle has collapsed.
pub fn degenerate_hinges(x: &[Vec3], rest: &RestState) -> usize {
    rest.hinges
        .iter()
        .filter(|h| {
            let s = h.stencil();
            0.5 * kernels::hinge_min_double_area(&[x[s[0]], x[s[1]], x[s[2]], x[s[3]]]) < crate::rest::MIN_FACE_AREA
        })
        .count()
}

/// Signed dihedral angle of every hinge.
pub fn hinge_angles(x: &[Vec3], rest: &RestState) -> Vec<f64> {
    rest.hinges
        .iter()
        .map(|h| {
            let s = h.stencil();
            kernels::dihedral_angle(&[x[s[0]], x[s[1]], x[s[2]], x[s[3]]])
        })
        .collect()
}

pub fn vertex_mass(rest: &RestState, mat: &MaterialParams, v: usize) -> f64 {
    mat.density * rest.vertex_area[v]
}

pub fn gravity_forces(rest: &RestState, mat: &MaterialParams) -> ForceField {
    (0..rest.num_vertices).map(|v| geom::scale(mat.gravity, vertex_mass(rest, mat, v))).collect()
}

pub fn gravity_energy(x: &[Vec3], rest: &RestState, mat: &MaterialParams) -> f64 {
    -x.iter().enumerate().map(|(v, p)| vertex_mass(rest, mat, v) * geom::dot(mat.gravity, *p)).sum::<f64>()
}

/// `strain + bend + gravity`, summed per vertex in that order.
pub fn internal_force(x: &[Vec3], rest: &RestState, mat: &MaterialParams) -> Result<ForceField> {
    let s = strain_forces(x, rest, mat)?;
    let b = bend_forces(x, rest, mat)?;
    let g = gravity_forces(rest, mat);
    Ok(s.iter().zip(&b).zip(&g).map(|((s, b), g)| geom::add(geom::add(*s, *b), *g)).collect())
}

/// Derivative of the internal force along `dir`, i.e. `J·dir` with `J` the
/// force Jacobian (the negated energy Hessian, hence symmetric).
pub fn internal_force_jvp(x: &[Vec3], dir: &[Vec3], rest: &RestState, mat: &MaterialParams) -> ForceField {
    let xd: Vec<P3<Dual>> = x
        .iter()
        .zip(dir)
        .map(|(p, v)| [Dual::new(p[0], v[0]), Dual::new(p[1], v[1]), Dual::new(p[2], v[2])])
        .collect();
    let (s, _) = strain_terms(&xd, rest, mat.mu, mat.lambda, mat.thickness);
    let (b, _, _) = bend_terms(&xd, rest, mat.k_bend);
    s.iter().zip(&b).map(|(s, b)| [s[0].d + b[0].d, s[1].d + b[1].d, s[2].d + b[2].d]).collect()
}

/// Largest eigenvalue magnitude of the force Jacobian at `x`, by power
/// iteration from a fixed start vector.
pub fn stiffness_bound(x: &[Vec3], rest: &RestState, mat: &MaterialParams, iterations: usize) -> f64 {
    let n = x.len();
    if n == 0 {
        return 0.0;
    }
    // deterministic, non-symmetric start so no mode is missed by construction
    let mut v: Vec<Vec3> = (0..n)
        .map(|i| {
            let t = i as f64;
            [(0.7 * t + 0.1).sin(), (1.3 * t + 0.5).cos(), (2.1 * t + 0.9).sin()]
        })
        .collect();
    let mut lambda = 0.0;
    for _ in 0..iterations {
        let nrm = v.iter().map(|p| geom::dot(*p, *p)).sum::<f64>().sqrt();
        if nrm == 0.0 {
            return lambda;
        }
        for p in &mut v {
            *p = geom::scale(*p, 1.0 / nrm);
        }
        let w = internal_force_jvp(x, &v, rest, mat);
        lambda = w.iter().map(|p| geom::dot(*p, *p)).sum::<f64>().sqrt();
        v = w;
    }
    lambda
}

/// Contact penalty `k Σ max(ε − dᵢ, 0)³` with `dᵢ = (xᵢ − pᵢ)·nᵢ` over
/// frozen nearest points and normals.
pub fn collision_energy_frozen(x: &[Vec3], frozen: &[BodyQuery], margin: f64, k_coll: f64) -> f64 {
    x.iter()
        .zip(frozen)
        .map(|(p, q)| {
            let gap = (margin - geom::dot(geom::sub(*p, q.p), q.n)).max(0.0);
            gap * gap * gap
        })
        .sum::<f64>()
        * k_coll
}

pub fn collision_forces_frozen(x: &[Vec3], frozen: &[BodyQuery], margin: f64, k_coll: f64) -> ForceField {
    x.iter()
        .zip(frozen)
        .map(|(p, q)| {
            let gap = (margin - geom::dot(geom::sub(*p, q.p), q.n)).max(0.0);
            geom::scale(q.n, 3.0 * k_coll * gap * gap)
        })
        .collect()
}

/// Contact penalty with nearest points and normals queried at `x`. For
/// analytic bodies the projected gap equals the signed distance exactly.
pub fn collision_energy(x: &[Vec3], body: &Body, margin: f64, k_coll: f64) -> f64 {
    collision_energy_frozen(x, &body.batch_query(x), margin, k_coll)
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EnergyBreakdown {
    pub e_strain: f64,
    pub e_bend: f64,
    pub e_grav: f64,
    pub e_coll: f64,
    pub total: f64,
}

impl EnergyBreakdown {
    pub fn new(e_strain: f64, e_bend: f64, e_grav: f64, e_coll: f64) -> Self {
        EnergyBreakdown { e_strain, e_bend, e_grav, e_coll, total: e_strain + e_bend + e_grav + e_coll }
    }
}

pub fn energy_breakdown(x: &[Vec3], rest: &RestState, mat: &MaterialParams, body: &Body, margin: f64, k_coll: f64) -> EnergyBreakdown {
    EnergyBreakdown::new(
        strain_energy(x, rest, mat),
        bend_energy(x, rest, mat),
        gravity_energy(x, rest, mat),
        collision_energy(x, body, margin, k_coll),
    )
}

/// Percentage of rest area on faces with at least one vertex inside the
/// body.
pub fn metric_b2g(x: &[Vec3], rest: &RestState, body: &Body) -> f64 {
    let inside: Vec<bool> = body.batch_query(x).iter().map(|q| q.d < 0.0).collect();
    let pen: f64 = rest
        .faces
        .iter()
        .zip(&rest.face_area)
        .filter(|(f, _)| f.iter().any(|&v| inside[v]))
        .fold(0.0, |acc, (_, a)| acc + a);
    100.0 * pen / rest.total_area
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyMetrics {
    pub e_strain: f64,
    pub e_bend: f64,
    pub e_strain_per_area: f64,
    pub e_bend_per_area: f64,
}

pub fn metric_energies(x: &[Vec3], rest: &RestState, mat: &MaterialParams) -> EnergyMetrics {
    let e_strain = strain_energy(x, rest, mat);
    let e_bend = bend_energy(x, rest, mat);
    EnergyMetrics {
        e_strain,
        e_bend,
        e_strain_per_area: e_strain / rest.total_area,
        e_bend_per_area: e_bend / rest.total_area,
    }
}
