//! Small fixed-size vector helpers over `[f64; 3]`.

pub type Vec3 = [f64; 3];

#[inline]
pub fn add(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

#[inline]
pub fn sub(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

#[inline]
pub fn scale(a: Vec3, s: f64) -> Vec3 {
    [a[0] * s, a[1] * s, a[2] * s]
}

#[inline]
pub fn dot(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
pub fn cross(a: Vec3, b: Vec3) -> Vec3 {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

#[inline]
pub fn norm(a: Vec3) -> f64 {
    dot(a, a).sqrt()
}

/// Unit vector along `a`, or `None` below `tiny`.
#[inline]
pub fn normalized(a: Vec3, tiny: f64) -> Option<Vec3> {
    let n = norm(a);
    (n > tiny).then(|| scale(a, 1.0 / n))
}

/// Axis-aligned bounds of a point set. Empty input yields inverted bounds.
pub fn bounds(points: &[Vec3]) -> (Vec3, Vec3) {
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for p in points {
        for k in 0..3 {
            lo[k] = lo[k].min(p[k]);
            hi[k] = hi[k].max(p[k]);
        }
    }
    (lo, hi)
}

pub fn centroid(points: &[Vec3]) -> Vec3 {
    let n = points.len().max(1) as f64;
    let s = points.iter().fold([0.0; 3], |acc, p| add(acc, *p));
    scale(s, 1.0 / n)
}

/// Rotation matrix from an axis and an angle (Rodrigues).
pub fn rotation(axis: Vec3, angle: f64) -> [[f64; 3]; 3] {
    let [x, y, z] = normalized(axis, 0.0).unwrap_or([0.0, 1.0, 0.0]);
    let (s, c) = angle.sin_cos();
    let t = 1.0 - c;
    [
        [t * x * x + c, t * x * y - s * z, t * x * z + s * y],
        [t * x * y + s * z, t * y * y + c, t * y * z - s * x],
        [t * x * z - s * y, t * y * z + s * x, t * z * z + c],
    ]
}

pub fn mat_vec(m: &[[f64; 3]; 3], v: Vec3) -> Vec3 {
    [dot(m[0], v), dot(m[1], v), dot(m[2], v)]
}

/// `N×3` tensor from a point list.
pub fn to_tensor(points: &[Vec3]) -> difftape::Tensor {
    difftape::Tensor::from_shape_fn((points.len(), 3), |(i, k)| points[i][k])
}

/// Point list from an `N×3` tensor.
pub fn to_points(t: &difftape::Tensor) -> Vec<Vec3> {
    t.rows().into_iter().map(|r| [r[0], r[1], r[2]]).collect()
}
