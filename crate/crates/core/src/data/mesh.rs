//! Triangle meshes and area-weighted surface sampling.

use std::path::Path;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::ply::read_ply;
use crate::error::{Error, Result};
use crate::geometry::{add, norm_sq, scale, sub, Point3, PointCloud};

#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    pub vertices: Vec<Point3>,
    pub faces: Vec<[usize; 3]>,
}

fn cross(a: Point3, b: Point3) -> Point3 {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

pub fn triangle_area(a: Point3, b: Point3, c: Point3) -> f64 {
    0.5 * norm_sq(cross(sub(b, a), sub(c, a))).sqrt()
}

impl Mesh {
    pub fn new(vertices: Vec<Point3>, faces: Vec<[usize; 3]>) -> Result<Self> {
        if let Some(f) = faces.iter().find(|f| f.iter().any(|&i| i >= vertices.len())) {
            return Err(Error::InvalidArgument(format!(
                "face {f:?} references a vertex beyond {}",
                vertices.len()
            )));
        }
        Ok(Self { vertices, faces })
    }

    /// Polygons are fan-triangulated.
    pub fn from_polygons(vertices: Vec<Point3>, polygons: &[Vec<usize>]) -> Result<Self> {
        let mut faces = Vec::new();
        for p in polygons {
            for k in 1..p.len().saturating_sub(1) {
                faces.push([p[0], p[k], p[k + 1]]);
            }
        }
        Self::new(vertices, faces)
    }

    pub fn surface_area(&self) -> f64 {
        self.faces
            .iter()
            .map(|f| triangle_area(self.vertices[f[0]], self.vertices[f[1]], self.vertices[f[2]]))
            .sum()
    }
}

/// Reads `.obj` or face-carrying `.ply` files.
pub fn load_mesh(path: &Path) -> Result<Mesh> {
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .map(str::to_ascii_lowercase)
        .unwrap_or_default();
    match ext.as_str() {
        "obj" => {
            let opts = tobj::LoadOptions {
                triangulate: true,
                single_index: true,
                ..Default::default()
            };
            let (models, _) = tobj::load_obj(path, &opts).map_err(|e| Error::Malformed {
                path: path.to_path_buf(),
                line: 0,
                reason: e.to_string(),
            })?;
            let mut vertices = Vec::new();
            let mut faces = Vec::new();
            for m in models {
                let base = vertices.len();
                vertices.extend(
                    m.mesh
                        .positions
                        .chunks_exact(3)
                        .map(|c| [c[0] as f64, c[1] as f64, c[2] as f64]),
                );
                faces.extend(
                    m.mesh
                        .indices
                        .chunks_exact(3)
                        .map(|t| [base + t[0] as usize, base + t[1] as usize, base + t[2] as usize]),
                );
            }
            Mesh::new(vertices, faces)
        }
        "ply" => {
            let d = read_ply(path)?;
            Mesh::from_polygons(d.vertices, &d.faces)
        }
        _ => Err(Error::UnsupportedFormat(path.to_path_buf())),
    }
}

/// Exactly `n` points distributed uniformly over the surface, in the raw frame.
pub fn sample_mesh(vertices: &[Point3], faces: &[[usize; 3]], n: usize, seed: u64) -> Result<PointCloud> {
    if n == 0 {
        return Err(Error::InvalidArgument("cannot sample 0 points".into()));
    }
    let mesh = Mesh::new(vertices.to_vec(), faces.to_vec())?;
    let areas: Vec<f64> = mesh
        .faces
        .iter()
        .map(|f| triangle_area(vertices[f[0]], vertices[f[1]], vertices[f[2]]))
        .collect();
    if !areas.iter().all(|a| a.is_finite()) {
        return Err(Error::InvalidArgument("non-finite mesh vertices".into()));
    }
    let pick = WeightedIndex::new(&areas).map_err(|_| Error::DegenerateMesh)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pts = (0..n)
        .map(|_| {
            let f = mesh.faces[pick.sample(&mut rng)];
            let (a, b, c) = (vertices[f[0]], vertices[f[1]], vertices[f[2]]);
            let s = rng.random::<f64>().sqrt();
            let r: f64 = rng.random();
            add(add(scale(a, 1.0 - s), scale(b, s * (1.0 - r))), scale(c, s * r))
        })
        .collect();
    PointCloud::new("mesh", pts)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fan_triangulation_and_area() {
        let m = Mesh::from_polygons(
            vec![[0.0; 3], [1.0, 0.0, 0.0], [1.0, 1.0, 0.0], [0.0, 1.0, 0.0]],
            &[vec![0, 1, 2, 3]],
        )
        .unwrap();
        assert_eq!(m.faces, vec![[0, 1, 2], [0, 2, 3]]);
        assert!((m.surface_area() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn degenerate_and_invalid_meshes() {
        let v = vec![[0.0; 3], [1.0, 0.0, 0.0], [2.0, 0.0, 0.0]];
        assert!(matches!(sample_mesh(&v, &[[0, 1, 2]], 5, 0), Err(Error::DegenerateMesh)));
        assert!(sample_mesh(&v, &[[0, 1, 3]], 5, 0).is_err());
        assert!(sample_mesh(&v, &[[0, 1, 2]], 0, 0).is_err());
    }

    #[test]
    fn reads_obj() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("q.obj");
        std::fs::write(&path, "v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1 2 3 4\n").unwrap();
        let m = load_mesh(&path).unwrap();
        assert_eq!(m.vertices.len(), 4);
        assert_eq!(m.faces.len(), 2);
        assert!((m.surface_area() - 1.0).abs() < 1e-6);
    }
}
