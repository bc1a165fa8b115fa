//! Garment triangle meshes: validation, OBJ I/O, procedural generators and
//! vertex normals.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{DrapeError, Result};
use crate::geom::{self, Vec3};

/// Triangle mesh in its template (rest) configuration.
///
/// Faces are counter-clockwise when seen from the side the normal points to.
#[derive(Debug, Clone, PartialEq)]
pub struct GarmentMesh {
    pub vertices: Vec<Vec3>,
    pub faces: Vec<[usize; 3]>,
    pub name: String,
}

impl GarmentMesh {
    /// Validates indices, repeated corners and edge-manifoldness.
    pub fn new(vertices: Vec<Vec3>, faces: Vec<[usize; 3]>, name: impl Into<String>) -> Result<Self> {
        let n = vertices.len();
        for (fi, f) in faces.iter().enumerate() {
            if let Some(&bad) = f.iter().find(|&&i| i >= n) {
                return Err(DrapeError::Topology(format!("face {fi} references vertex {bad} of {n}")));
            }
            if f[0] == f[1] || f[1] == f[2] || f[0] == f[2] {
                return Err(DrapeError::Topology(format!("face {fi} repeats a vertex: {f:?}")));
            }
        }
        let mesh = GarmentMesh { vertices, faces, name: name.into() };
        if let Some(((a, b), fs)) = mesh.edge_faces().into_iter().find(|(_, fs)| fs.len() > 2) {
            return Err(DrapeError::Topology(format!(
                "edge ({a}, {b}) is shared by {} faces",
                fs.len()
            )));
        }
        Ok(mesh)
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_faces(&self) -> usize {
        self.faces.len()
    }

    /// Undirected edge `(min, max)` → incident faces, in face order.
    pub fn edge_faces(&self) -> BTreeMap<(usize, usize), Vec<usize>> {
        let mut map: BTreeMap<(usize, usize), Vec<usize>> = BTreeMap::new();
        for (fi, f) in self.faces.iter().enumerate() {
            for k in 0..3 {
                let (a, b) = (f[k], f[(k + 1) % 3]);
                map.entry((a.min(b), a.max(b))).or_default().push(fi);
            }
        }
        map
    }

    /// Sorted unique undirected edges.
    pub fn edges(&self) -> Vec<[usize; 2]> {
        self.edge_faces().into_keys().map(|(a, b)| [a, b]).collect()
    }

    pub fn total_area(&self, positions: &[Vec3]) -> f64 {
        self.faces.iter().map(|f| face_area(positions, f)).sum()
    }
}

pub(crate) fn face_area(x: &[Vec3], f: &[usize; 3]) -> f64 {
    let n = geom::cross(geom::sub(x[f[1]], x[f[0]]), geom::sub(x[f[2]], x[f[0]]));
    0.5 * geom::norm(n)
}

/// Reads an OBJ file. Only `v` and `f` records are interpreted.
pub fn load_obj(path: impl AsRef<Path>) -> Result<GarmentMesh> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| DrapeError::io(path, e))?;
    let name = path.file_stem().and_then(|s| s.to_str()).unwrap_or("mesh").to_string();
    parse_obj(&text, &path.display().to_string(), name)
}

/// Parses OBJ text. `origin` labels error messages. Polygons are fan
/// triangulated around their first corner.
pub fn parse_obj(text: &str, origin: &str, name: impl Into<String>) -> Result<GarmentMesh> {
    let malformed = |line: usize, msg: String| DrapeError::Malformed { path: origin.to_string(), line, msg };
    let mut vertices = Vec::new();
    let mut polys: Vec<(usize, Vec<i64>)> = Vec::new();

    for (ln, raw) in text.lines().enumerate() {
        let line_no = ln + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        let mut it = line.split_whitespace();
        match it.next() {
            Some("v") => {
                let coords: Vec<f64> = it
                    .take(3)
                    .map(|t| t.parse::<f64>())
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|e| malformed(line_no, format!("bad vertex coordinate: {e}")))?;
                if coords.len() != 3 {
                    return Err(malformed(line_no, "vertex needs 3 coordinates".into()));
                }
                vertices.push([coords[0], coords[1], coords[2]]);
            }
            Some("f") => {
                let mut idx = Vec::new();
                for tok in it {
                    let first = tok.split('/').next().unwrap_or("");
                    let i: i64 = first
                        .parse()
                        .map_err(|_| malformed(line_no, format!("bad face index `{tok}`")))?;
                    // negative indices are relative to the vertices read so far
                    idx.push(if i < 0 { vertices.len() as i64 + i + 1 } else { i });
                }
                if idx.len() < 3 {
                    return Err(malformed(line_no, "face needs at least 3 corners".into()));
                }
                polys.push((line_no, idx));
            }
            _ => {}
        }
    }

    let count = vertices.len();
    let mut faces = Vec::new();
    for (line, idx) in polys {
        let mut zero_based = Vec::with_capacity(idx.len());
        for &i in &idx {
            if i < 1 || i as usize > count {
                return Err(DrapeError::IndexOutOfRange { path: origin.to_string(), line, index: i, count });
            }
            zero_based.push(i as usize - 1);
        }
        for k in 1..zero_based.len() - 1 {
            faces.push([zero_based[0], zero_based[k], zero_based[k + 1]]);
        }
    }
    GarmentMesh::new(vertices, faces, name)
}

/// OBJ text for `mesh` at `positions`, with per-vertex normals.
///
/// Coordinates use the shortest representation that parses back to the
/// same `f64`, so a round trip is exact.
pub fn write_obj(mesh: &GarmentMesh, positions: &[Vec3]) -> String {
    let normals = vertex_normals(mesh, positions);
    let mut out = String::with_capacity(64 * (positions.len() + mesh.faces.len()));
    let _ = writeln!(out, "# {}", mesh.name);
    for p in positions {
        let _ = writeln!(out, "v {} {} {}", p[0], p[1], p[2]);
    }
    for n in &normals {
        let _ = writeln!(out, "vn {} {} {}", n[0], n[1], n[2]);
    }
    for f in &mesh.faces {
        let (a, b, c) = (f[0] + 1, f[1] + 1, f[2] + 1);
        let _ = writeln!(out, "f {a}//{a} {b}//{b} {c}//{c}");
    }
    out
}

pub fn save_obj(mesh: &GarmentMesh, positions: &[Vec3], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, write_obj(mesh, positions)).map_err(|e| DrapeError::io(path, e))
}

/// `n × n` grid spanning `size × size` metres in the xz-plane, centred on
/// the origin, facing +y.
pub fn make_square_cloth(n: usize, size: f64) -> Result<GarmentMesh> {
    if n < 2 {
        return Err(DrapeError::Argument(format!("square cloth needs n >= 2, got {n}")));
    }
    if !(size > 0.0) {
        return Err(DrapeError::Argument(format!("square cloth size must be positive, got {size}")));
    }
    let h = size / (n - 1) as f64;
    let mut vertices = Vec::with_capacity(n * n);
    for j in 0..n {
        for i in 0..n {
            vertices.push([-0.5 * size + i as f64 * h, 0.0, -0.5 * size + j as f64 * h]);
        }
    }
    let id = |i: usize, j: usize| j * n + i;
    let mut faces = Vec::with_capacity(2 * (n - 1) * (n - 1));
    for j in 0..n - 1 {
        for i in 0..n - 1 {
            let (v00, v10, v01, v11) = (id(i, j), id(i + 1, j), id(i, j + 1), id(i + 1, j + 1));
            faces.push([v00, v01, v11]);
            faces.push([v00, v11, v10]);
        }
    }
    GarmentMesh::new(vertices, faces, format!("square_{n}"))
}

/// Open cylinder about the y-axis with outward-facing triangles. The seam
/// at angle zero is welded.
pub fn make_tube_garment(radius: f64, height: f64, nu: usize, nv: usize) -> Result<GarmentMesh> {
    if nu < 3 || nv < 2 {
        return Err(DrapeError::Argument(format!("tube needs nu >= 3 and nv >= 2, got {nu}x{nv}")));
    }
    if !(radius > 0.0 && height > 0.0) {
        return Err(DrapeError::Argument("tube radius and height must be positive".into()));
    }
    let mut vertices = Vec::with_capacity(nu * nv);
    for l in 0..nv {
        let y = -0.5 * height + height * l as f64 / (nv - 1) as f64;
        for k in 0..nu {
            let phi = std::f64::consts::TAU * k as f64 / nu as f64;
            vertices.push([radius * phi.cos(), y, radius * phi.sin()]);
        }
    }
    let id = |k: usize, l: usize| l * nu + (k % nu);
    let mut faces = Vec::with_capacity(2 * nu * (nv - 1));
    for l in 0..nv - 1 {
        for k in 0..nu {
            let (a, b, c, d) = (id(k, l), id(k + 1, l), id(k, l + 1), id(k + 1, l + 1));
            faces.push([a, c, d]);
            faces.push([a, d, b]);
        }
    }
    GarmentMesh::new(vertices, faces, format!("tube_{nu}x{nv}"))
}

/// Area-weighted vertex normals. Vertices whose incident normals cancel
/// (or that have no faces) get `(0, 1, 0)`.
pub fn vertex_normals(mesh: &GarmentMesh, positions: &[Vec3]) -> Vec<Vec3> {
    normals_from_faces(&mesh.faces, positions)
}

pub(crate) fn normals_from_faces(faces: &[[usize; 3]], positions: &[Vec3]) -> Vec<Vec3> {
    let mut acc = vec![[0.0; 3]; positions.len()];
    for f in faces {
        // |cross| is twice the face area, so summing raw cross products
        // is the area weighting
        let n = geom::cross(geom::sub(positions[f[1]], positions[f[0]]), geom::sub(positions[f[2]], positions[f[0]]));
        for &v in f {
            acc[v] = geom::add(acc[v], n);
        }
    }
    acc.into_iter()
        .map(|n| geom::normalized(n, 1e-300).unwrap_or([0.0, 1.0, 0.0]))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_triangle() {
        let m = parse_obj("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 3\n", "t.obj", "t").unwrap();
        assert_eq!((m.num_vertices(), m.num_faces()), (3, 1));
        assert_eq!(m.faces[0], [0, 1, 2]);
    }

    #[test]
    fn quad_is_fan_triangulated() {
        let m = parse_obj("v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1 2 3 4\n", "q.obj", "q").unwrap();
        assert_eq!(m.faces, vec![[0, 1, 2], [0, 2, 3]]);
    }

    #[test]
    fn index_out_of_range_has_line() {
        let err = parse_obj("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 5\n", "bad.obj", "b").unwrap_err();
        match err {
            DrapeError::IndexOutOfRange { line, index, count, .. } => assert_eq!((line, index, count), (4, 5, 3)),
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn malformed_vertex_has_line() {
        let err = parse_obj("v 0 0 0\nv 1 x 0\n", "bad.obj", "b").unwrap_err();
        assert!(matches!(err, DrapeError::Malformed { line: 2, .. }), "{err}");
    }

    #[test]
    fn slash_forms_and_negative_indices() {
        let m = parse_obj("v 0 0 0\nv 1 0 0\nv 0 1 0\nvn 0 0 1\nf -3//1 -2//1 -1//1\n", "s.obj", "s").unwrap();
        assert_eq!(m.faces, vec![[0, 1, 2]]);
    }

    #[test]
    fn non_manifold_edge_rejected() {
        let text = "v 0 0 0\nv 1 0 0\nv 0 1 0\nv 0 -1 0\nv 0 0 1\nf 1 2 3\nf 2 1 4\nf 1 2 5\n";
        assert!(matches!(parse_obj(text, "nm.obj", "nm"), Err(DrapeError::Topology(_))));
    }

    #[test]
    fn square_counts_and_area() {
        let m = make_square_cloth(2, 1.0).unwrap();
        assert_eq!((m.num_vertices(), m.num_faces()), (4, 2));
        assert!((m.total_area(&m.vertices) - 1.0).abs() < 1e-15);
        assert!(m.vertices.iter().all(|v| v[1] == 0.0));
        assert!(make_square_cloth(1, 1.0).is_err());
    }

    #[test]
    fn tube_counts() {
        let m = make_tube_garment(0.3, 0.5, 16, 8).unwrap();
        assert_eq!((m.num_vertices(), m.num_faces()), (128, 224));
        // seam welded: every edge has one or two faces, boundary only at the rims
        let boundary = m.edge_faces().values().filter(|f| f.len() == 1).count();
        assert_eq!(boundary, 2 * 16);
        assert!(make_tube_garment(0.3, 0.5, 2, 8).is_err());
    }

    #[test]
    fn tube_faces_point_outward() {
        let m = make_tube_garment(0.3, 0.5, 12, 4).unwrap();
        let n = vertex_normals(&m, &m.vertices);
        for (v, nv) in m.vertices.iter().zip(&n) {
            let radial = geom::normalized([v[0], 0.0, v[2]], 0.0).unwrap();
            assert!(geom::dot(radial, *nv) > 0.9);
        }
    }

    #[test]
    fn flat_cloth_normals_up() {
        let m = make_square_cloth(5, 2.0).unwrap();
        for n in vertex_normals(&m, &m.vertices) {
            assert!((n[1] - 1.0).abs() < 1e-15 && n[0].abs() < 1e-15 && n[2].abs() < 1e-15);
        }
    }

    #[test]
    fn normals_rotate_with_mesh() {
        let m = make_square_cloth(4, 1.0).unwrap();
        let r = geom::rotation([0.3, -1.0, 0.7], 1.1);
        let x: Vec<Vec3> = m.vertices.iter().map(|&v| geom::mat_vec(&r, v)).collect();
        let want = geom::mat_vec(&r, [0.0, 1.0, 0.0]);
        for n in vertex_normals(&m, &x) {
            assert!(geom::norm(geom::sub(n, want)) < 1e-12);
        }
    }

    #[test]
    fn isolated_vertex_uses_fallback() {
        let m = GarmentMesh::new(vec![[0.0; 3], [1.0, 0.0, 0.0], [0.0, 0.0, 1.0], [5.0, 5.0, 5.0]], vec![[0, 2, 1]], "iso").unwrap();
        assert_eq!(vertex_normals(&m, &m.vertices)[3], [0.0, 1.0, 0.0]);
    }
}
