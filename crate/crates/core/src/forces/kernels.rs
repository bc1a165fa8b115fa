//! Per-element force and energy kernels, generic over the scalar type.

use super::real::Real;
use crate::geom::Vec3;

pub type P3<T> = [T; 3];

#[inline]
fn sub<T: Real>(a: P3<T>, b: P3<T>) -> P3<T> {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

#[inline]
fn add<T: Real>(a: P3<T>, b: P3<T>) -> P3<T> {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

#[inline]
fn mul<T: Real>(a: P3<T>, s: T) -> P3<T> {
    [a[0] * s, a[1] * s, a[2] * s]
}

#[inline]
fn mulf<T: Real>(a: P3<T>, s: f64) -> P3<T> {
    [a[0].scale(s), a[1].scale(s), a[2].scale(s)]
}

#[inline]
fn dot<T: Real>(a: P3<T>, b: P3<T>) -> T {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
fn cross<T: Real>(a: P3<T>, b: P3<T>) -> P3<T> {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

#[inline]
fn neg<T: Real>(a: P3<T>) -> P3<T> {
    [-a[0], -a[1], -a[2]]
}

/// Deformation gradient `F = Ds · Dm⁻¹`, returned as its two 3-vector
/// columns.
#[inline]
pub fn deformation_gradient<T: Real>(x: &[P3<T>; 3], dm_inv: &[[f64; 2]; 2]) -> [P3<T>; 2] {
    let d1 = sub(x[1], x[0]);
    let d2 = sub(x[2], x[0]);
    [
        add(mulf(d1, dm_inv[0][0]), mulf(d2, dm_inv[1][0])),
        add(mulf(d1, dm_inv[0][1]), mulf(d2, dm_inv[1][1])),
    ]
}

/// Green strain `½(FᵀF − I)` as `[g00, g01, g11]`.
#[inline]
pub fn green_strain<T: Real>(f: &[P3<T>; 2]) -> [T; 3] {
    let half = 0.5;
    [
        (dot(f[0], f[0]) - T::cst(1.0)).scale(half),
        dot(f[0], f[1]).scale(half),
        (dot(f[1], f[1]) - T::cst(1.0)).scale(half),
    ]
}

/// StVK membrane forces on the three corners of one face and the face's
/// energy. `vol` is the reference volume.
#[inline]
pub fn strain_face<T: Real>(
    x: &[P3<T>; 3],
    dm_inv: &[[f64; 2]; 2],
    vol: f64,
    mu: f64,
    lambda: f64,
) -> ([P3<T>; 3], T) {
    let f = deformation_gradient(x, dm_inv);
    let [g00, g01, g11] = green_strain(&f);
    let tr = g00 + g11;
    let s00 = g00.scale(2.0 * mu) + tr.scale(lambda);
    let s01 = g01.scale(2.0 * mu);
    let s11 = g11.scale(2.0 * mu) + tr.scale(lambda);
    // P = F·S, column-wise
    let p0 = add(mul(f[0], s00), mul(f[1], s01));
    let p1 = add(mul(f[0], s01), mul(f[1], s11));
    let f1 = neg(mulf(add(mulf(p0, dm_inv[0][0]), mulf(p1, dm_inv[0][1])), vol));
    let f2 = neg(mulf(add(mulf(p0, dm_inv[1][0]), mulf(p1, dm_inv[1][1])), vol));
    let f0 = neg(add(f1, f2));
    let energy = ((g00 * g00 + (g01 * g01).scale(2.0) + g11 * g11).scale(mu) + (tr * tr).scale(0.5 * lambda)).scale(vol);
    ([f0, f1, f2], energy)
}

/// Signed dihedral angle of the hinge `(x0, x1 | x2, x3)`: zero when flat,
/// sign given by the turn of the second normal about the edge.
#[inline]
pub fn dihedral<T: Real>(x: &[P3<T>; 4]) -> T {
    let e = sub(x[1], x[0]);
    let na = cross(e, sub(x[2], x[0]));
    let nb = cross(sub(x[0], x[1]), sub(x[3], x[1]));
    let len = dot(e, e).sqrt();
    let sin = dot(cross(na, nb), e) / len;
    sin.atan2(dot(na, nb))
}

pub fn dihedral_angle(x: &[Vec3; 4]) -> f64 {
    dihedral::<f64>(x)
}

/// Twice the smaller of the two wing areas. Used to skip hinges with a
/// collapsed triangle.
#[inline]
pub fn hinge_min_double_area<T: Real>(x: &[P3<T>; 4]) -> f64 {
    let e = sub(x[1], x[0]);
    let na = cross(e, sub(x[2], x[0]));
    let nb = cross(sub(x[0], x[1]), sub(x[3], x[1]));
    dot(na, na).value().sqrt().min(dot(nb, nb).value().sqrt())
}

/// Gradient of [`dihedral`] with respect to the four stencil vertices.
#[inline]
pub fn dihedral_gradient<T: Real>(x: &[P3<T>; 4]) -> [P3<T>; 4] {
    let e = sub(x[1], x[0]);
    let na = cross(e, sub(x[2], x[0]));
    let nb = cross(sub(x[0], x[1]), sub(x[3], x[1]));
    let len = dot(e, e).sqrt();
    let inv_len = T::cst(1.0) / len;
    let ua = mul(na, T::cst(1.0) / dot(na, na));
    let ub = mul(nb, T::cst(1.0) / dot(nb, nb));
    let g2 = neg(mul(ua, len));
    let g3 = neg(mul(ub, len));
    let g0 = neg(add(
        mul(ua, dot(sub(x[2], x[1]), e) * inv_len),
        mul(ub, dot(sub(x[3], x[1]), e) * inv_len),
    ));
    let g1 = add(
        mul(ua, dot(sub(x[2], x[0]), e) * inv_len),
        mul(ub, dot(sub(x[3], x[0]), e) * inv_len),
    );
    [g0, g1, g2, g3]
}

/// Bending forces on the four stencil vertices and the hinge energy
/// `½ k s (θ − θ₀)²`. `None` when a wing triangle has collapsed.
#[inline]
pub fn bend_hinge<T: Real>(x: &[P3<T>; 4], scale: f64, k: f64, rest_angle: f64) -> Option<([P3<T>; 4], T)> {
    if 0.5 * hinge_min_double_area(x) < crate::rest::MIN_FACE_AREA {
        return None;
    }
    let theta = dihedral(x) - T::cst(rest_angle);
    let grad = dihedral_gradient(x);
    let c = -(theta.scale(k * scale));
    let f = [mul(grad[0], c), mul(grad[1], c), mul(grad[2], c), mul(grad[3], c)];
    Some((f, (theta * theta).scale(0.5 * k * scale)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stretched_triangle_strain() {
        let inv = [[1.0, 0.0], [0.0, 1.0]];
        let x = [[0.0; 3], [2.0, 0.0, 0.0], [0.0, 1.0, 0.0]];
        let f = deformation_gradient(&x, &inv);
        assert_eq!(f, [[2.0, 0.0, 0.0], [0.0, 1.0, 0.0]]);
        assert_eq!(green_strain(&f), [1.5, 0.0, 0.0]);
    }

    #[test]
    fn fold_quarter_turn() {
        // shared edge along x, wings in the +y direction and the +z direction
        let x = [[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
        let theta = dihedral_angle(&x);
        assert!((theta.abs() - std::f64::consts::FRAC_PI_2).abs() < 1e-15);
        let (_, e) = bend_hinge(&x, 0.25, 1.0, 0.0).unwrap();
        assert!((e - 0.30842513753404244).abs() < 1e-15);
    }

    #[test]
    fn flat_hinge_is_zero() {
        let x = [[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [1.0, -1.0, 0.0]];
        assert_eq!(dihedral_angle(&x), 0.0);
        let (f, e) = bend_hinge(&x, 1.0, 1.0, 0.0).unwrap();
        assert_eq!(e, 0.0);
        assert!(f.iter().flatten().all(|v| *v == 0.0));
    }

    #[test]
    fn collapsed_wing_skipped() {
        let x = [[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.5, 0.0, 0.0], [1.0, -1.0, 0.0]];
        assert!(bend_hinge(&x, 1.0, 1.0, 0.0).is_none());
    }

    #[test]
    fn dihedral_gradient_matches_finite_differences() {
        let x = [[0.1, -0.2, 0.05], [1.1, 0.1, -0.1], [0.3, 0.9, 0.2], [0.7, -0.8, 0.6]];
        let g = dihedral_gradient(&x);
        let h = 1e-6;
        for v in 0..4 {
            for c in 0..3 {
                let mut a = x;
                let mut b = x;
                a[v][c] += h;
                b[v][c] -= h;
                let fd = (dihedral_angle(&a) - dihedral_angle(&b)) / (2.0 * h);
                assert!((fd - g[v][c]).abs() < 1e-7, "v{v} c{c}: fd {fd} vs {}", g[v][c]);
            }
        }
    }
}
