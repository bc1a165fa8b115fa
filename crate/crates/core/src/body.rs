//! Signed-distance bodies: analytic primitives, unions, and watertight
//! triangle meshes behind a bounding volume hierarchy.

use std::collections::BTreeMap;
use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{DrapeError, Result};
use crate::geom::{self, Vec3};

/// Direction used when a query point sits on an analytic centre or axis.
pub const FALLBACK_DIRECTION: Vec3 = [0.0, 1.0, 0.0];

const CENTER_TOLERANCE: f64 = 1e-12;

/// Result of a distance query. `d < 0` means inside.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BodyQuery {
    pub d: f64,
    pub p: Vec3,
    pub n: Vec3,
}

#[derive(Debug, Clone)]
pub enum Body {
    Sphere { center: Vec3, radius: f64 },
    Capsule { a: Vec3, b: Vec3, radius: f64 },
    /// Everything below the plane through `point` is inside.
    HalfSpace { point: Vec3, normal: Vec3 },
    /// Union by minimum signed distance.
    Composite(Vec<Body>),
    Mesh(Arc<MeshBody>),
}

impl Body {
    pub fn sphere(center: Vec3, radius: f64) -> Result<Body> {
        if !(radius > 0.0) {
            return Err(DrapeError::Argument(format!("sphere radius must be positive, got {radius}")));
        }
        Ok(Body::Sphere { center, radius })
    }

    pub fn capsule(a: Vec3, b: Vec3, radius: f64) -> Result<Body> {
        if !(radius > 0.0) {
            return Err(DrapeError::Argument(format!("capsule radius must be positive, got {radius}")));
        }
        if geom::norm(geom::sub(b, a)) < CENTER_TOLERANCE {
            return Err(DrapeError::Argument("capsule endpoints coincide".into()));
        }
        Ok(Body::Capsule { a, b, radius })
    }

    pub fn half_space(point: Vec3, normal: Vec3) -> Result<Body> {
        let normal = geom::normalized(normal, CENTER_TOLERANCE)
            .ok_or_else(|| DrapeError::Argument("half-space normal is zero".into()))?;
        Ok(Body::HalfSpace { point, normal })
    }

    pub fn composite(children: Vec<Body>) -> Result<Body> {
        if children.is_empty() {
            return Err(DrapeError::Argument("composite body needs at least one child".into()));
        }
        Ok(Body::Composite(children))
    }

    pub fn mesh(vertices: Vec<Vec3>, faces: Vec<[usize; 3]>) -> Result<Body> {
        Ok(Body::Mesh(Arc::new(MeshBody::new(vertices, faces)?)))
    }

    /// Torso-with-arms proxy: a vertical capsule plus two horizontal ones
    /// at shoulder height.
    pub fn torso(radius: f64, height: f64, arm_radius: f64, arm_length: f64) -> Result<Body> {
        let half = 0.5 * height;
        let shoulder = half - radius.max(arm_radius);
        let torso = Body::capsule([0.0, -half, 0.0], [0.0, half, 0.0], radius)?;
        let left = Body::capsule([0.0, shoulder, 0.0], [-(radius + arm_length), shoulder, 0.0], arm_radius)?;
        let right = Body::capsule([0.0, shoulder, 0.0], [radius + arm_length, shoulder, 0.0], arm_radius)?;
        Body::composite(vec![torso, left, right])
    }

    pub fn query(&self, x: Vec3) -> BodyQuery {
        match self {
            Body::Sphere { center, radius } => ball_query(*center, *radius, x),
            Body::Capsule { a, b, radius } => ball_query(closest_on_segment(*a, *b, x), *radius, x),
            Body::HalfSpace { point, normal } => {
                let d = geom::dot(geom::sub(x, *point), *normal);
                BodyQuery { d, p: geom::sub(x, geom::scale(*normal, d)), n: *normal }
            }
            Body::Composite(children) => {
                let mut best = children[0].query(x);
                for c in &children[1..] {
                    let q = c.query(x);
                    if q.d < best.d {
                        best = q;
                    }
                }
                best
            }
            Body::Mesh(m) => m.query(x),
        }
    }

    /// Elementwise [`Body::query`], in input order.
    pub fn batch_query(&self, xs: &[Vec3]) -> Vec<BodyQuery> {
        let mut out = Vec::with_capacity(xs.len());
        xs.par_iter().map(|&x| self.query(x)).collect_into_vec(&mut out);
        out
    }

    /// Axis-aligned bounds, `None` for unbounded bodies.
    pub fn bbox(&self) -> Option<(Vec3, Vec3)> {
        match self {
            Body::Sphere { center, radius } => Some((geom::sub(*center, [*radius; 3]), geom::add(*center, [*radius; 3]))),
            Body::Capsule { a, b, radius } => {
                let (lo, hi) = geom::bounds(&[*a, *b]);
                Some((geom::sub(lo, [*radius; 3]), geom::add(hi, [*radius; 3])))
            }
            Body::HalfSpace { .. } => None,
            Body::Composite(children) => {
                let mut pts = Vec::new();
                for c in children {
                    let (lo, hi) = c.bbox()?;
                    pts.push(lo);
                    pts.push(hi);
                }
                Some(geom::bounds(&pts))
            }
            Body::Mesh(m) => Some(geom::bounds(&m.vertices)),
        }
    }
}

fn ball_query(center: Vec3, radius: f64, x: Vec3) -> BodyQuery {
    let v = geom::sub(x, center);
    let len = geom::norm(v);
    let dir = if len < CENTER_TOLERANCE { FALLBACK_DIRECTION } else { geom::scale(v, 1.0 / len) };
    BodyQuery { d: len - radius, p: geom::add(center, geom::scale(dir, radius)), n: dir }
}

fn closest_on_segment(a: Vec3, b: Vec3, x: Vec3) -> Vec3 {
    let ab = geom::sub(b, a);
    let t = (geom::dot(geom::sub(x, a), ab) / geom::dot(ab, ab)).clamp(0.0, 1.0);
    geom::add(a, geom::scale(ab, t))
}

/// Which part of a triangle the closest point lies on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Feature {
    Face,
    /// Edge from corner `k` to corner `k + 1`.
    Edge(u8),
    Vertex(u8),
}

/// Closest point on triangle `abc` to `p`, after Ericson's region tests.
fn closest_on_triangle(p: Vec3, a: Vec3, b: Vec3, c: Vec3) -> (Vec3, Feature) {
    let ab = geom::sub(b, a);
    let ac = geom::sub(c, a);
    let ap = geom::sub(p, a);
    let d1 = geom::dot(ab, ap);
    let d2 = geom::dot(ac, ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return (a, Feature::Vertex(0));
    }
    let bp = geom::sub(p, b);
    let d3 = geom::dot(ab, bp);
    let d4 = geom::dot(ac, bp);
    if d3 >= 0.0 && d4 <= d3 {
        return (b, Feature::Vertex(1));
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        let v = d1 / (d1 - d3);
        return (geom::add(a, geom::scale(ab, v)), Feature::Edge(0));
    }
    let cp = geom::sub(p, c);
    let d5 = geom::dot(ab, cp);
    let d6 = geom::dot(ac, cp);
    if d6 >= 0.0 && d5 <= d6 {
        return (c, Feature::Vertex(2));
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        let w = d2 / (d2 - d6);
        return (geom::add(a, geom::scale(ac, w)), Feature::Edge(2));
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        let w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return (geom::add(b, geom::scale(geom::sub(c, b), w)), Feature::Edge(1));
    }
    let denom = 1.0 / (va + vb + vc);
    let v = vb * denom;
    let w = vc * denom;
    (geom::add(a, geom::add(geom::scale(ab, v), geom::scale(ac, w))), Feature::Face)
}

#[derive(Debug, Clone, Copy)]
struct Aabb {
    lo: Vec3,
    hi: Vec3,
}

impl Aabb {
    fn empty() -> Self {
        Aabb { lo: [f64::INFINITY; 3], hi: [f64::NEG_INFINITY; 3] }
    }

    fn grow(&mut self, p: Vec3) {
        for k in 0..3 {
            self.lo[k] = self.lo[k].min(p[k]);
            self.hi[k] = self.hi[k].max(p[k]);
        }
    }

    fn dist2(&self, p: Vec3) -> f64 {
        let mut s = 0.0;
        for k in 0..3 {
            let e = (self.lo[k] - p[k]).max(0.0).max(p[k] - self.hi[k]);
            s += e * e;
        }
        s
    }
}

#[derive(Debug, Clone)]
enum BvhNode {
    Inner { bounds: Aabb, children: [u32; 2] },
    Leaf { bounds: Aabb, start: u32, end: u32 },
}

impl BvhNode {
    fn bounds(&self) -> &Aabb {
        match self {
            BvhNode::Inner { bounds, .. } | BvhNode::Leaf { bounds, .. } => bounds,
        }
    }
}

const LEAF_SIZE: usize = 4;

/// Watertight triangle mesh with angle-weighted pseudonormals.
#[derive(Debug, Clone)]
pub struct MeshBody {
    pub vertices: Vec<Vec3>,
    pub faces: Vec<[usize; 3]>,
    face_normals: Vec<Vec3>,
    vertex_normals: Vec<Vec3>,
    /// Per face and local edge, the normalized sum of both adjacent face normals.
    edge_normals: Vec<[Vec3; 3]>,
    nodes: Vec<BvhNode>,
    order: Vec<u32>,
}

impl MeshBody {
    pub fn new(vertices: Vec<Vec3>, faces: Vec<[usize; 3]>) -> Result<Self> {
        if faces.is_empty() {
            return Err(DrapeError::Topology("mesh body has no faces".into()));
        }
        let n = vertices.len();
        let mut edge_faces: BTreeMap<(usize, usize), Vec<usize>> = BTreeMap::new();
        for (fi, f) in faces.iter().enumerate() {
            if f.iter().any(|&i| i >= n) || f[0] == f[1] || f[1] == f[2] || f[0] == f[2] {
                return Err(DrapeError::Topology(format!("mesh body face {fi} is invalid: {f:?}")));
            }
            for k in 0..3 {
                let (a, b) = (f[k], f[(k + 1) % 3]);
                edge_faces.entry((a.min(b), a.max(b))).or_default().push(fi);
            }
        }
        if let Some(((a, b), fs)) = edge_faces.iter().find(|(_, fs)| fs.len() != 2) {
            return Err(DrapeError::Topology(format!(
                "mesh body is not watertight: edge ({a}, {b}) has {} faces",
                fs.len()
            )));
        }

        let mut face_normals = Vec::with_capacity(faces.len());
        for (fi, f) in faces.iter().enumerate() {
            let nrm = geom::cross(geom::sub(vertices[f[1]], vertices[f[0]]), geom::sub(vertices[f[2]], vertices[f[0]]));
            let nrm = geom::normalized(nrm, 1e-300)
                .ok_or_else(|| DrapeError::DegenerateFace { face: fi, area: 0.0 })?;
            face_normals.push(nrm);
        }

        let mut vertex_normals = vec![[0.0; 3]; n];
        for (f, &fnrm) in faces.iter().zip(&face_normals) {
            for k in 0..3 {
                let p = vertices[f[k]];
                let u = geom::normalized(geom::sub(vertices[f[(k + 1) % 3]], p), 0.0).unwrap_or([0.0; 3]);
                let v = geom::normalized(geom::sub(vertices[f[(k + 2) % 3]], p), 0.0).unwrap_or([0.0; 3]);
                let angle = geom::dot(u, v).clamp(-1.0, 1.0).acos();
                vertex_normals[f[k]] = geom::add(vertex_normals[f[k]], geom::scale(fnrm, angle));
            }
        }
        for v in &mut vertex_normals {
            *v = geom::normalized(*v, 0.0).unwrap_or(FALLBACK_DIRECTION);
        }

        let mut edge_normals = vec![[[0.0; 3]; 3]; faces.len()];
        for (fi, f) in faces.iter().enumerate() {
            for k in 0..3 {
                let (a, b) = (f[k], f[(k + 1) % 3]);
                let adj = &edge_faces[&(a.min(b), a.max(b))];
                let sum = geom::add(face_normals[adj[0]], face_normals[adj[1]]);
                edge_normals[fi][k] = geom::normalized(sum, 1e-300).unwrap_or(face_normals[fi]);
            }
        }

        let mut body = MeshBody {
            vertices,
            faces,
            face_normals,
            vertex_normals,
            edge_normals,
            nodes: Vec::new(),
            order: Vec::new(),
        };
        body.build_bvh();
        Ok(body)
    }

    fn triangle(&self, t: usize) -> (Vec3, Vec3, Vec3) {
        let f = self.faces[t];
        (self.vertices[f[0]], self.vertices[f[1]], self.vertices[f[2]])
    }

    fn build_bvh(&mut self) {
        let centroids: Vec<Vec3> = (0..self.faces.len())
            .map(|t| {
                let (a, b, c) = self.triangle(t);
                geom::scale(geom::add(a, geom::add(b, c)), 1.0 / 3.0)
            })
            .collect();
        let mut order: Vec<u32> = (0..self.faces.len() as u32).collect();
        let mut nodes = Vec::new();
        self.build_node(&mut nodes, &mut order, 0, self.faces.len(), &centroids);
        self.nodes = nodes;
        self.order = order;
    }

    fn build_node(&self, nodes: &mut Vec<BvhNode>, order: &mut [u32], start: usize, end: usize, centroids: &[Vec3]) -> u32 {
        let mut bounds = Aabb::empty();
        let mut cbounds = Aabb::empty();
        for &t in &order[start..end] {
            let (a, b, c) = self.triangle(t as usize);
            bounds.grow(a);
            bounds.grow(b);
            bounds.grow(c);
            cbounds.grow(centroids[t as usize]);
        }
        let id = nodes.len() as u32;
        if end - start <= LEAF_SIZE {
            nodes.push(BvhNode::Leaf { bounds, start: start as u32, end: end as u32 });
            return id;
        }
        let ext = geom::sub(cbounds.hi, cbounds.lo);
        let axis = if ext[0] >= ext[1] && ext[0] >= ext[2] { 0 } else if ext[1] >= ext[2] { 1 } else { 2 };
        let mid = (start + end) / 2;
        // ties broken by triangle id so the tree is independent of sort internals
        order[start..end].sort_by(|&p, &q| {
            centroids[p as usize][axis].total_cmp(&centroids[q as usize][axis]).then(p.cmp(&q))
        });
        nodes.push(BvhNode::Leaf { bounds, start: 0, end: 0 });
        let left = self.build_node(nodes, order, start, mid, centroids);
        let right = self.build_node(nodes, order, mid, end, centroids);
        nodes[id as usize] = BvhNode::Inner { bounds, children: [left, right] };
        id
    }

    fn pseudonormal(&self, t: usize, feature: Feature) -> Vec3 {
        match feature {
            Feature::Face => self.face_normals[t],
            Feature::Edge(k) => self.edge_normals[t][k as usize],
            Feature::Vertex(k) => self.vertex_normals[self.faces[t][k as usize]],
        }
    }

    /// Nearest triangle, closest point and feature, by BVH traversal.
    fn nearest(&self, x: Vec3) -> (usize, Vec3, Feature, f64) {
        let mut best = (usize::MAX, [0.0; 3], Feature::Face, f64::INFINITY);
        let mut stack: Vec<u32> = vec![0];
        while let Some(id) = stack.pop() {
            let node = &self.nodes[id as usize];
            if node.bounds().dist2(x) > best.3 {
                continue;
            }
            match node {
                BvhNode::Leaf { start, end, .. } => {
                    for &t in &self.order[*start as usize..*end as usize] {
                        let (a, b, c) = self.triangle(t as usize);
                        let (p, feat) = closest_on_triangle(x, a, b, c);
                        let v = geom::sub(x, p);
                        let d2 = geom::dot(v, v);
                        if d2 < best.3 || (d2 == best.3 && (t as usize) < best.0) {
                            best = (t as usize, p, feat, d2);
                        }
                    }
                }
                BvhNode::Inner { children, .. } => {
                    let [l, r] = *children;
                    let dl = self.nodes[l as usize].bounds().dist2(x);
                    let dr = self.nodes[r as usize].bounds().dist2(x);
                    // push the farther child first so the nearer one is visited next
                    if dl <= dr {
                        stack.push(r);
                        stack.push(l);
                    } else {
                        stack.push(l);
                        stack.push(r);
                    }
                }
            }
        }
        best
    }

    pub fn query(&self, x: Vec3) -> BodyQuery {
        let (t, p, feat, d2) = self.nearest(x);
        let n = self.pseudonormal(t, feat);
        let dist = d2.sqrt();
        let d = if geom::dot(geom::sub(x, p), n) < 0.0 { -dist } else { dist };
        BodyQuery { d, p, n }
    }

    /// Reference query scanning every triangle.
    pub fn query_brute_force(&self, x: Vec3) -> BodyQuery {
        let mut best = (0, [0.0; 3], Feature::Face, f64::INFINITY);
        for t in 0..self.faces.len() {
            let (a, b, c) = self.triangle(t);
            let (p, feat) = closest_on_triangle(x, a, b, c);
            let v = geom::sub(x, p);
            let d2 = geom::dot(v, v);
            if d2 < best.3 {
                best = (t, p, feat, d2);
            }
        }
        let n = self.pseudonormal(best.0, best.2);
        let dist = best.3.sqrt();
        let d = if geom::dot(geom::sub(x, best.1), n) < 0.0 { -dist } else { dist };
        BodyQuery { d, p: best.1, n }
    }
}

/// Subdivided icosahedron projected onto a sphere, outward-facing.
pub fn icosphere(center: Vec3, radius: f64, subdivisions: usize) -> (Vec<Vec3>, Vec<[usize; 3]>) {
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    let mut verts: Vec<Vec3> = [
        [-1.0, t, 0.0], [1.0, t, 0.0], [-1.0, -t, 0.0], [1.0, -t, 0.0],
        [0.0, -1.0, t], [0.0, 1.0, t], [0.0, -1.0, -t], [0.0, 1.0, -t],
        [t, 0.0, -1.0], [t, 0.0, 1.0], [-t, 0.0, -1.0], [-t, 0.0, 1.0],
    ]
    .iter()
    .map(|&v| geom::normalized(v, 0.0).unwrap())
    .collect();
    let mut faces: Vec<[usize; 3]> = vec![
        [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
        [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
        [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
        [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
    ];
    for _ in 0..subdivisions {
        let mut mid: BTreeMap<(usize, usize), usize> = BTreeMap::new();
        let mut midpoint = |a: usize, b: usize, verts: &mut Vec<Vec3>| {
            *mid.entry((a.min(b), a.max(b))).or_insert_with(|| {
                let m = geom::normalized(geom::add(verts[a], verts[b]), 0.0).unwrap();
                verts.push(m);
                verts.len() - 1
            })
        };
        let mut next = Vec::with_capacity(faces.len() * 4);
        for [a, b, c] in faces {
            let ab = midpoint(a, b, &mut verts);
            let bc = midpoint(b, c, &mut verts);
            let ca = midpoint(c, a, &mut verts);
            next.extend([[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
        }
        faces = next;
    }
    let verts = verts.into_iter().map(|v| geom::add(center, geom::scale(v, radius))).collect();
    (verts, faces)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn unit_sphere() -> Body {
        Body::sphere([0.0; 3], 1.0).unwrap()
    }

    #[test]
    fn sphere_outside_and_inside() {
        let q = unit_sphere().query([0.0, 2.0, 0.0]);
        assert_eq!(q, BodyQuery { d: 1.0, p: [0.0, 1.0, 0.0], n: [0.0, 1.0, 0.0] });
        let q = unit_sphere().query([0.0, 0.5, 0.0]);
        assert_eq!(q, BodyQuery { d: -0.5, p: [0.0, 1.0, 0.0], n: [0.0, 1.0, 0.0] });
    }

    #[test]
    fn centre_uses_fallback() {
        let q = unit_sphere().query([0.0; 3]);
        assert_eq!(q.n, FALLBACK_DIRECTION);
        assert_eq!(q.d, -1.0);
        let cap = Body::capsule([0.0, -1.0, 0.0], [0.0, 1.0, 0.0], 0.2).unwrap();
        assert_eq!(cap.query([0.0, 0.3, 0.0]).n, FALLBACK_DIRECTION);
    }

    #[test]
    fn constructors_validate() {
        assert!(Body::sphere([0.0; 3], 0.0).is_err());
        assert!(Body::capsule([1.0; 3], [1.0; 3], 0.1).is_err());
        assert!(Body::composite(vec![]).is_err());
        assert!(Body::half_space([0.0; 3], [0.0; 3]).is_err());
    }

    #[test]
    fn capsule_distance_about_segment() {
        let cap = Body::capsule([0.0, -1.0, 0.0], [0.0, 1.0, 0.0], 0.25).unwrap();
        let q = cap.query([1.0, 0.5, 0.0]);
        assert!((q.d - 0.75).abs() < 1e-15);
        assert_eq!(q.p, [0.25, 0.5, 0.0]);
        let q = cap.query([0.0, 3.0, 0.0]);
        assert!((q.d - 1.75).abs() < 1e-15);
    }

    #[test]
    fn composite_takes_minimum() {
        let a = Body::sphere([0.0; 3], 1.0).unwrap();
        let b = Body::sphere([3.0, 0.0, 0.0], 0.5).unwrap();
        let c = Body::composite(vec![a.clone(), b.clone()]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let x = [rng.gen_range(-3.0..6.0), rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0)];
            let (qa, qb, qc) = (a.query(x), b.query(x), c.query(x));
            assert_eq!(qc.d, qa.d.min(qb.d));
            assert_eq!(qc, if qa.d <= qb.d { qa } else { qb });
        }
    }

    #[test]
    fn empty_batch() {
        assert!(unit_sphere().batch_query(&[]).is_empty());
    }

    #[test]
    fn batch_equals_loop_bitwise() {
        let body = Body::torso(0.15, 0.6, 0.05, 0.3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let xs: Vec<Vec3> = (0..100).map(|_| [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)]).collect();
        let batch = body.batch_query(&xs);
        for (x, q) in xs.iter().zip(&batch) {
            assert_eq!(*q, body.query(*x));
        }
    }

    #[test]
    fn half_space_projection() {
        let h = Body::half_space([0.0, 0.5, 0.0], [0.0, 2.0, 0.0]).unwrap();
        let q = h.query([0.3, 0.2, -1.0]);
        assert!((q.d + 0.3).abs() < 1e-15);
        assert_eq!(q.n, [0.0, 1.0, 0.0]);
        assert!(h.bbox().is_none());
    }

    #[test]
    fn icosphere_distance_close_to_analytic() {
        let (v, f) = icosphere([0.0; 3], 1.0, 3);
        let body = Body::mesh(v, f).unwrap();
        let q = body.query([0.0, 1.5, 0.0]);
        assert!((q.d - 0.5).abs() < 0.01, "d = {}", q.d);
        let q = body.query([0.1, -0.2, 0.3]);
        assert!(q.d < 0.0);
    }

    #[test]
    fn non_watertight_mesh_rejected() {
        let (v, mut f) = icosphere([0.0; 3], 1.0, 1);
        f.pop();
        assert!(matches!(Body::mesh(v, f), Err(DrapeError::Topology(_))));
    }

    #[test]
    fn bvh_matches_brute_force() {
        let (v, f) = icosphere([0.1, -0.2, 0.05], 0.8, 4);
        assert!(f.len() >= 5000);
        let body = MeshBody::new(v, f).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let xs: Vec<Vec3> = (0..10_000).map(|_| [rng.gen_range(-1.5..1.5), rng.gen_range(-1.5..1.5), rng.gen_range(-1.5..1.5)]).collect();
        let wrapper = Body::Mesh(Arc::new(body.clone()));
        let all = wrapper.batch_query(&xs);
        assert_eq!(all.len(), xs.len());
        for i in (0..xs.len()).step_by(200) {
            let fast = all[i];
            let slow = body.query_brute_force(xs[i]);
            assert!((fast.d - slow.d).abs() < 1e-9);
            assert!(geom::norm(geom::sub(fast.p, slow.p)) < 1e-9);
        }
    }

    fn ray_hits(mesh: &MeshBody, o: Vec3, dir: Vec3) -> usize {
        let mut hits = 0;
        for t in 0..mesh.faces.len() {
            let (a, b, c) = mesh.triangle(t);
            let e1 = geom::sub(b, a);
            let e2 = geom::sub(c, a);
            let pv = geom::cross(dir, e2);
            let det = geom::dot(e1, pv);
            if det.abs() < 1e-14 {
                continue;
            }
            let inv = 1.0 / det;
            let tv = geom::sub(o, a);
            let u = geom::dot(tv, pv) * inv;
            if !(0.0..=1.0).contains(&u) {
                continue;
            }
            let qv = geom::cross(tv, e1);
            let v = geom::dot(dir, qv) * inv;
            if v < 0.0 || u + v > 1.0 {
                continue;
            }
            if geom::dot(e2, qv) * inv > 0.0 {
                hits += 1;
            }
        }
        hits
    }

    /// Closed non-convex test shape: a unit cube with a notch cut out of
    /// its top face.
    fn notched_box() -> MeshBody {
        // L-shaped prism extruded along z
        let profile = [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.6, 1.0], [0.6, 0.5], [0.0, 0.5]];
        let mut v = Vec::new();
        for z in [0.0, 1.0] {
            for p in profile {
                v.push([p[0], p[1], z]);
            }
        }
        let n = profile.len();
        let mut f = Vec::new();
        for k in 0..n {
            let k1 = (k + 1) % n;
            f.push([k, k1, n + k1]);
            f.push([k, n + k1, n + k]);
        }
        // caps: fan-triangulate the L as two convex parts
        for tri in [[0, 1, 4], [1, 2, 3], [1, 3, 4], [0, 4, 5]] {
            f.push([tri[0], tri[2], tri[1]]);
            f.push([n + tri[0], n + tri[1], n + tri[2]]);
        }
        MeshBody::new(v, f).unwrap()
    }

    #[test]
    fn sign_agrees_with_ray_parity() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let (v, f) = icosphere([0.0; 3], 1.0, 2);
        for mesh in [MeshBody::new(v, f).unwrap(), notched_box()] {
            let dir = geom::normalized([0.5772, 0.3181, 0.7517], 0.0).unwrap();
            let mut checked = 0;
            while checked < 1000 {
                let x = [rng.gen_range(-1.3..1.3), rng.gen_range(-1.3..1.3), rng.gen_range(-1.3..1.3)];
                let q = mesh.query(x);
                if q.d.abs() < 1e-6 {
                    continue;
                }
                let inside = ray_hits(&mesh, x, dir) % 2 == 1;
                assert_eq!(inside, q.d < 0.0, "x = {x:?}, d = {}", q.d);
                checked += 1;
            }
        }
    }

    #[test]
    fn queries_are_pure() {
        let (v, f) = icosphere([0.0; 3], 1.0, 2);
        let body = Body::mesh(v, f).unwrap();
        let x = [0.3, 0.9, -0.4];
        assert_eq!(body.query(x), body.query(x));
    }

    #[test]
    fn mesh_normals_are_unit() {
        let mesh = notched_box();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..500 {
            let q = mesh.query([rng.gen_range(-1.0..2.0), rng.gen_range(-1.0..2.0), rng.gen_range(-1.0..2.0)]);
            assert!((geom::norm(q.n) - 1.0).abs() < 1e-9);
        }
    }

    proptest! {
        #[test]
        fn analytic_surface_consistency(
            kind in 0usize..3,
            x in prop::array::uniform3(-2.0f64..2.0),
            t in -0.1f64..0.1,
        ) {
            let body = match kind {
                0 => Body::sphere([0.1, 0.2, -0.3], 1.0).unwrap(),
                1 => Body::capsule([0.0, -0.5, 0.0], [0.2, 0.7, 0.1], 1.0).unwrap(),
                _ => Body::half_space([0.0, 0.1, 0.0], [0.3, 1.0, 0.2]).unwrap(),
            };
            let q = body.query(x);
            prop_assert!((geom::norm(q.n) - 1.0).abs() < 1e-9);
            prop_assert!((geom::dot(geom::sub(x, q.p), q.n) - q.d).abs() < 1e-7);
            let y = geom::add(q.p, geom::scale(q.n, t));
            prop_assert!((body.query(y).d - t).abs() < 1e-7);
        }
    }
}
