use std::path::Path;

use drape_core::body::icosphere;
use drape_core::geom::Vec3;
use drape_core::mesh::{make_square_cloth, make_tube_garment, save_obj, GarmentMesh};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Shape {
    Square { n: usize, size: f64 },
    Tube { radius: f64, height: f64, nu: usize, nv: usize },
    Icosphere { radius: f64, subdivisions: usize },
}

pub fn build(shape: Shape) -> Result<GarmentMesh> {
    Ok(match shape {
        Shape::Square { n, size } => make_square_cloth(n, size)?,
        Shape::Tube { radius, height, nu, nv } => make_tube_garment(radius, height, nu, nv)?,
        Shape::Icosphere { radius, subdivisions } => {
            if !(radius > 0.0) || subdivisions > 6 {
                return Err(CliError::config("icosphere", "radius must be positive and subdivisions at most 6"));
            }
            let (v, f) = icosphere([0.0; 3], radius, subdivisions);
            GarmentMesh::new(v, f, "icosphere")?
        }
    })
}

/// Writes `shape` as OBJ, each vertex moved by up to `jitter` metres per
/// axis from a stream seeded with `seed`.
pub fn run(shape: Shape, jitter: f64, seed: u64, out: &Path) -> Result<GarmentMesh> {
    if !(jitter >= 0.0 && jitter.is_finite()) {
        return Err(CliError::config("--jitter", format!("must be non-negative, got {jitter}")));
    }
    let mesh = build(shape)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x: Vec<Vec3> = if jitter > 0.0 {
        mesh.vertices.iter().map(|p| [0, 1, 2].map(|k| p[k] + rng.gen_range(-jitter..=jitter))).collect()
    } else {
        mesh.vertices.clone()
    };
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        super::ensure_out(dir)?;
    }
    save_obj(&mesh, &x, out)?;
    Ok(mesh)
}
