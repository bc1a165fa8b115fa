//! Rest-pose precomputation: material frames, areas, masses, hinges and
//! directed edges.

use crate::error::{DrapeError, Result};
use crate::forces::kernels;
use crate::geom::{self, Vec3};
use crate::mesh::GarmentMesh;

/// Rest area below which a triangle is rejected.
pub const MIN_FACE_AREA: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaterialParams {
    /// Lamé shear modulus (Pa).
    pub mu: f64,
    /// Lamé first parameter (Pa).
    pub lambda: f64,
    /// Bending stiffness (N·m).
    pub k_bend: f64,
    /// Areal density (kg/m²).
    pub density: f64,
    /// Shell thickness (m).
    pub thickness: f64,
    /// Gravitational acceleration (m/s²).
    pub gravity: Vec3,
}

impl Default for MaterialParams {
    fn default() -> Self {
        MaterialParams {
            mu: 2.36e4,
            lambda: 4.44e4,
            k_bend: 3.96e-5,
            density: 0.426,
            thickness: 4.7e-4,
            gravity: [0.0, -9.81, 0.0],
        }
    }
}

impl MaterialParams {
    pub fn validate(&self) -> Result<()> {
        let ok = self.mu > 0.0
            && self.lambda >= 0.0
            && self.k_bend >= 0.0
            && self.density > 0.0
            && self.thickness > 0.0
            && self.gravity.iter().all(|g| g.is_finite());
        if ok {
            Ok(())
        } else {
            Err(DrapeError::Argument(format!(
                "material needs mu > 0, lambda >= 0, k_bend >= 0, density > 0, thickness > 0; got {self:?}"
            )))
        }
    }

    /// Same material with `mu`, `lambda` and `k_bend` multiplied by `factor`.
    pub fn stiffened(&self, factor: f64) -> Self {
        MaterialParams { mu: self.mu * factor, lambda: self.lambda * factor, k_bend: self.k_bend * factor, ..*self }
    }
}

/// Two triangles sharing the edge `edge`. `opposite[0]` lies in `faces[0]`,
/// `opposite[1]` in `faces[1]`. The edge runs in the cyclic order of
/// `faces[0]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Hinge {
    pub edge: [usize; 2],
    pub opposite: [usize; 2],
    pub faces: [usize; 2],
}

impl Hinge {
    /// Stencil in kernel order: edge start, edge end, then the two wings.
    pub fn stencil(&self) -> [usize; 4] {
        [self.edge[0], self.edge[1], self.opposite[0], self.opposite[1]]
    }
}

/// Compressed vertex → (element, slot) incidence, used to accumulate
/// per-element contributions in a fixed order.
#[derive(Debug, Clone, Default)]
pub struct Incidence {
    pub offsets: Vec<usize>,
    pub entries: Vec<(u32, u8)>,
}

impl Incidence {
    fn build<const K: usize>(num_vertices: usize, elements: impl Iterator<Item = [usize; K]> + Clone) -> Self {
        let mut counts = vec![0usize; num_vertices + 1];
        for el in elements.clone() {
            for v in el {
                counts[v + 1] += 1;
            }
        }
        for i in 0..num_vertices {
            counts[i + 1] += counts[i];
        }
        let mut cursor = counts.clone();
        let mut entries = vec![(0u32, 0u8); counts[num_vertices]];
        for (e, el) in elements.enumerate() {
            for (slot, v) in el.into_iter().enumerate() {
                entries[cursor[v]] = (e as u32, slot as u8);
                cursor[v] += 1;
            }
        }
        Incidence { offsets: counts, entries }
    }

    pub fn of(&self, v: usize) -> &[(u32, u8)] {
        &self.entries[self.offsets[v]..self.offsets[v + 1]]
    }
}

/// Everything about the garment that depends only on its rest pose.
#[derive(Debug, Clone)]
pub struct RestState {
    pub num_vertices: usize,
    pub faces: Vec<[usize; 3]>,
    /// Inverse of the flattened rest edge matrix, row-major.
    pub dm_inv: Vec<[[f64; 2]; 2]>,
    pub face_area: Vec<f64>,
    /// Face area times thickness.
    pub face_volume: Vec<f64>,
    /// Shape-function gradients per face corner; they sum to zero.
    pub shape_grad: Vec<[[f64; 2]; 3]>,
    /// One third of the incident rest area per vertex.
    pub vertex_area: Vec<f64>,
    pub mass: Vec<f64>,
    pub hinges: Vec<Hinge>,
    pub hinge_length: Vec<f64>,
    pub hinge_area: Vec<f64>,
    /// `length² / (4 · area)` per hinge.
    pub hinge_scale: Vec<f64>,
    pub hinge_rest_angle: Vec<f64>,
    /// Directed edges `(receiver, sender)`, both orientations of every edge.
    pub directed_edges: Vec<[usize; 2]>,
    /// `x_receiver − x_sender` at rest.
    pub edge_rest_vector: Vec<Vec3>,
    pub edge_rest_length: Vec<f64>,
    pub face_incidence: Incidence,
    pub hinge_incidence: Incidence,
    pub total_area: f64,
    /// Bend towards the stored rest angles instead of towards flat.
    pub use_rest_angle: bool,
}

impl RestState {
    pub fn with_rest_angle(mut self, on: bool) -> Self {
        self.use_rest_angle = on;
        self
    }

    /// Angle a hinge relaxes towards.
    #[inline]
    pub fn target_angle(&self, hinge: usize) -> f64 {
        if self.use_rest_angle {
            self.hinge_rest_angle[hinge]
        } else {
            0.0
        }
    }
}

pub fn build_rest_state(mesh: &GarmentMesh, mat: &MaterialParams) -> Result<RestState> {
    mat.validate()?;
    let x = &mesh.vertices;
    let n = mesh.num_vertices();
    let nf = mesh.num_faces();

    let mut dm_inv = Vec::with_capacity(nf);
    let mut face_area = Vec::with_capacity(nf);
    let mut shape_grad = Vec::with_capacity(nf);
    for (fi, f) in mesh.faces.iter().enumerate() {
        let e1 = geom::sub(x[f[1]], x[f[0]]);
        let e2 = geom::sub(x[f[2]], x[f[0]]);
        let area = 0.5 * geom::norm(geom::cross(e1, e2));
        if !(area >= MIN_FACE_AREA) {
            return Err(DrapeError::DegenerateFace { face: fi, area });
        }
        let u = geom::scale(e1, 1.0 / geom::norm(e1));
        let along = geom::dot(e2, u);
        let perp = geom::sub(e2, geom::scale(u, along));
        let w = geom::scale(perp, 1.0 / geom::norm(perp));
        // columns are the flattened edges (|e1|, 0) and (e2·u, e2·w)
        let (a, b, d) = (geom::dot(e1, u), along, geom::dot(e2, w));
        let inv = [[1.0 / a, -b / (a * d)], [0.0, 1.0 / d]];
        let b1 = inv[0];
        let b2 = inv[1];
        shape_grad.push([[-(b1[0] + b2[0]), -(b1[1] + b2[1])], b1, b2]);
        dm_inv.push(inv);
        face_area.push(area);
    }

    let mut vertex_area = vec![0.0; n];
    for (f, &a) in mesh.faces.iter().zip(&face_area) {
        for &v in f {
            vertex_area[v] += a / 3.0;
        }
    }
    let mass = vertex_area.iter().map(|a| mat.density * a).collect();

    let mut hinges = Vec::new();
    let mut directed_edges = Vec::new();
    for ((a, b), fs) in mesh.edge_faces() {
        directed_edges.push([a, b]);
        directed_edges.push([b, a]);
        if fs.len() != 2 {
            continue;
        }
        let fa = mesh.faces[fs[0]];
        let fb = mesh.faces[fs[1]];
        let k = (0..3).find(|&k| (fa[k] == a || fa[k] == b) && (fa[(k + 1) % 3] == a || fa[(k + 1) % 3] == b)).unwrap();
        let edge = [fa[k], fa[(k + 1) % 3]];
        let wing_a = fa[(k + 2) % 3];
        let wing_b = *fb.iter().find(|&&v| v != a && v != b).unwrap();
        hinges.push(Hinge { edge, opposite: [wing_a, wing_b], faces: [fs[0], fs[1]] });
    }

    let mut hinge_length = Vec::with_capacity(hinges.len());
    let mut hinge_area = Vec::with_capacity(hinges.len());
    let mut hinge_scale = Vec::with_capacity(hinges.len());
    let mut hinge_rest_angle = Vec::with_capacity(hinges.len());
    for h in &hinges {
        let s = h.stencil();
        let l = geom::norm(geom::sub(x[s[1]], x[s[0]]));
        let area = face_area[h.faces[0]] + face_area[h.faces[1]];
        hinge_length.push(l);
        hinge_area.push(area);
        hinge_scale.push(l * l / (4.0 * area));
        hinge_rest_angle.push(kernels::dihedral_angle(&[x[s[0]], x[s[1]], x[s[2]], x[s[3]]]));
    }

    let edge_rest_vector: Vec<Vec3> = directed_edges.iter().map(|&[r, s]| geom::sub(x[r], x[s])).collect();
    let edge_rest_length = edge_rest_vector.iter().map(|&v| geom::norm(v)).collect();

    let face_incidence = Incidence::build(n, mesh.faces.iter().copied());
    let hinge_incidence = Incidence::build(n, hinges.iter().map(|h| h.stencil()));
    let total_area = face_area.iter().sum();
    let face_volume = face_area.iter().map(|a| a * mat.thickness).collect();

    Ok(RestState {
        num_vertices: n,
        faces: mesh.faces.clone(),
        dm_inv,
        face_area,
        face_volume,
        shape_grad,
        vertex_area,
        mass,
        hinges,
        hinge_length,
        hinge_area,
        hinge_scale,
        hinge_rest_angle,
        directed_edges,
        edge_rest_vector,
        edge_rest_length,
        face_incidence,
        hinge_incidence,
        total_area,
        use_rest_angle: false,
    })
}
