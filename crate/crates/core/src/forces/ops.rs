//! Fused tape operations for forces and energies.
//!
//! Each op takes the positions plus the material scalars it depends on.
//! Forces and energies are linear in each material scalar, so material
//! adjoints are inner products with unit-parameter evaluations. The
//! position adjoint of the force op is a Jacobian-vector product, valid
//! because the force Jacobian is symmetric.

use std::sync::Arc;

use difftape::{scalar, CustomOp, Tape, TapeError, Tensor, Var};

use super::*;

/// Material scalars as tape nodes, each `1×1`.
#[derive(Debug, Clone, Copy)]
pub struct MaterialVars {
    pub mu: Var,
    pub lambda: Var,
    pub k_bend: Var,
    pub density: Var,
}

impl MaterialVars {
    /// Records the material as constants, or as leaves when `track` is set.
    pub fn record(tape: &mut Tape, mat: &MaterialParams, track: bool) -> Self {
        let mut put = |v: f64| if track { tape.leaf(scalar(v)) } else { tape.constant(scalar(v)) };
        MaterialVars { mu: put(mat.mu), lambda: put(mat.lambda), k_bend: put(mat.k_bend), density: put(mat.density) }
    }

    fn inputs(&self, x: Var) -> [Var; 5] {
        [x, self.mu, self.lambda, self.k_bend, self.density]
    }
}

/// Material whose scalars are read from the op inputs.
fn material_from(inputs: &[&Tensor], base: &MaterialParams) -> MaterialParams {
    MaterialParams {
        mu: inputs[1][(0, 0)],
        lambda: inputs[2][(0, 0)],
        k_bend: inputs[3][(0, 0)],
        density: inputs[4][(0, 0)],
        ..*base
    }
}

fn inner(a: &Tensor, b: &[Vec3]) -> f64 {
    a.rows().into_iter().zip(b).map(|(r, p)| r[0] * p[0] + r[1] * p[1] + r[2] * p[2]).sum()
}

fn scaled_field(field: &[Vec3], s: f64) -> Tensor {
    Tensor::from_shape_fn((field.len(), 3), |(i, k)| field[i][k] * s)
}

/// `g ⊙ field`, rowwise, as an `N×3` tensor.
fn field_tensor(field: &[Vec3]) -> Tensor {
    geom::to_tensor(field)
}

fn unit_gravity(rest: &RestState, mat: &MaterialParams) -> ForceField {
    gravity_forces(rest, &MaterialParams { density: 1.0, ..*mat })
}

struct InternalForceOp {
    rest: Arc<RestState>,
    base: MaterialParams,
}

impl CustomOp for InternalForceOp {
    fn name(&self) -> &'static str {
        "internal_force"
    }

    fn vjp(&self, inputs: &[&Tensor], _output: &Tensor, g: &Tensor) -> Vec<Option<Tensor>> {
        let mat = material_from(inputs, &self.base);
        let x = geom::to_points(inputs[0]);
        let dir = geom::to_points(g);
        let dx = field_tensor(&internal_force_jvp(&x, &dir, &self.rest, &mat));
        let (f_mu, _) = strain_terms(&x, &self.rest, 1.0, 0.0, mat.thickness);
        let (f_lambda, _) = strain_terms(&x, &self.rest, 0.0, 1.0, mat.thickness);
        let (f_k, _, _) = bend_terms(&x, &self.rest, 1.0);
        let f_rho = unit_gravity(&self.rest, &mat);
        vec![
            Some(dx),
            Some(scalar(inner(g, &f_mu))),
            Some(scalar(inner(g, &f_lambda))),
            Some(scalar(inner(g, &f_k))),
            Some(scalar(inner(g, &f_rho))),
        ]
    }
}

/// Internal force field at the positions held by `x` (`N×3`).
pub fn internal_force_var(
    tape: &mut Tape,
    x: Var,
    mat_vars: &MaterialVars,
    rest: &Arc<RestState>,
    base: &MaterialParams,
) -> Result<Var> {
    let inputs = mat_vars.inputs(x);
    let vals: Vec<&Tensor> = inputs.iter().map(|&v| tape.value(v)).collect();
    check_shape(tape, x, rest)?;
    let mat = material_from(&vals, base);
    let pts = geom::to_points(vals[0]);
    let f = internal_force(&pts, rest, &mat)?;
    let value = field_tensor(&f);
    Ok(tape.custom(&inputs, value, Box::new(InternalForceOp { rest: rest.clone(), base: *base })))
}

fn check_shape(tape: &Tape, x: Var, rest: &RestState) -> Result<()> {
    let shape = tape.shape(x);
    if shape != [rest.num_vertices, 3] {
        return Err(TapeError::Shape { op: "positions", lhs: shape, rhs: [rest.num_vertices, 3] }.into());
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum EnergyKind {
    Strain,
    Bend,
    Gravity,
}

struct EnergyOp {
    kind: EnergyKind,
    rest: Arc<RestState>,
    base: MaterialParams,
}

impl CustomOp for EnergyOp {
    fn name(&self) -> &'static str {
        match self.kind {
            EnergyKind::Strain => "strain_energy",
            EnergyKind::Bend => "bend_energy",
            EnergyKind::Gravity => "gravity_energy",
        }
    }

    fn vjp(&self, inputs: &[&Tensor], _output: &Tensor, g: &Tensor) -> Vec<Option<Tensor>> {
        let g = g[(0, 0)];
        let mat = material_from(inputs, &self.base);
        let x = geom::to_points(inputs[0]);
        let rest = &*self.rest;
        let mut out = vec![None, None, None, None, None];
        match self.kind {
            EnergyKind::Strain => {
                let (f, _) = strain_terms(&x, rest, mat.mu, mat.lambda, mat.thickness);
                out[0] = Some(scaled_field(&f, -g));
                out[1] = Some(scalar(g * strain_terms(&x, rest, 1.0, 0.0, mat.thickness).1));
                out[2] = Some(scalar(g * strain_terms(&x, rest, 0.0, 1.0, mat.thickness).1));
            }
            EnergyKind::Bend => {
                let (f, _, _) = bend_terms(&x, rest, mat.k_bend);
                out[0] = Some(scaled_field(&f, -g));
                out[3] = Some(scalar(g * bend_terms(&x, rest, 1.0).1));
            }
            EnergyKind::Gravity => {
                out[0] = Some(scaled_field(&gravity_forces(rest, &mat), -g));
                out[4] = Some(scalar(g * gravity_energy(&x, rest, &MaterialParams { density: 1.0, ..mat })));
            }
        }
        out
    }
}

fn energy_var(
    tape: &mut Tape,
    kind: EnergyKind,
    x: Var,
    mat_vars: &MaterialVars,
    rest: &Arc<RestState>,
    base: &MaterialParams,
) -> Result<Var> {
    check_shape(tape, x, rest)?;
    let inputs = mat_vars.inputs(x);
    let vals: Vec<&Tensor> = inputs.iter().map(|&v| tape.value(v)).collect();
    let mat = material_from(&vals, base);
    let pts = geom::to_points(vals[0]);
    let e = match kind {
        EnergyKind::Strain => strain_energy(&pts, rest, &mat),
        EnergyKind::Bend => bend_energy(&pts, rest, &mat),
        EnergyKind::Gravity => gravity_energy(&pts, rest, &mat),
    };
    Ok(tape.custom(&inputs, scalar(e), Box::new(EnergyOp { kind, rest: rest.clone(), base: *base })))
}

pub fn strain_energy_var(tape: &mut Tape, x: Var, m: &MaterialVars, rest: &Arc<RestState>, base: &MaterialParams) -> Result<Var> {
    energy_var(tape, EnergyKind::Strain, x, m, rest, base)
}

pub fn bend_energy_var(tape: &mut Tape, x: Var, m: &MaterialVars, rest: &Arc<RestState>, base: &MaterialParams) -> Result<Var> {
    energy_var(tape, EnergyKind::Bend, x, m, rest, base)
}

pub fn gravity_energy_var(tape: &mut Tape, x: Var, m: &MaterialVars, rest: &Arc<RestState>, base: &MaterialParams) -> Result<Var> {
    energy_var(tape, EnergyKind::Gravity, x, m, rest, base)
}

struct CollisionEnergyOp {
    frozen: Arc<Vec<BodyQuery>>,
    margin: f64,
    k_coll: f64,
}

impl CustomOp for CollisionEnergyOp {
    fn name(&self) -> &'static str {
        "collision_energy"
    }

    fn vjp(&self, inputs: &[&Tensor], _output: &Tensor, g: &Tensor) -> Vec<Option<Tensor>> {
        let x = geom::to_points(inputs[0]);
        let f = collision_forces_frozen(&x, &self.frozen, self.margin, self.k_coll);
        vec![Some(scaled_field(&f, -g[(0, 0)]))]
    }
}

/// Contact penalty with the body queried at the current value of `x` and
/// then held fixed.
pub fn collision_energy_var(tape: &mut Tape, x: Var, body: &Body, margin: f64, k_coll: f64) -> Result<Var> {
    let pts = geom::to_points(tape.value(x));
    let frozen = Arc::new(body.batch_query(&pts));
    let e = collision_energy_frozen(&pts, &frozen, margin, k_coll);
    Ok(tape.custom(&[x], scalar(e), Box::new(CollisionEnergyOp { frozen, margin, k_coll })))
}
