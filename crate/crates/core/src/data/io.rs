//! Point cloud files: ascii xyz, polygon-format vertices, and raw float32
//! blobs with a JSON sidecar.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::ply::{read_ply, write_ply, PlyEncoding};
use crate::error::{Error, Result};
use crate::geometry::{Point3, PointCloud};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CloudFormat {
    Xyz,
    Ply,
    RawF32,
}

impl CloudFormat {
    pub fn from_path(path: &Path) -> Result<Self> {
        let ext = path
            .extension()
            .and_then(|e| e.to_str())
            .map(str::to_ascii_lowercase)
            .unwrap_or_default();
        match ext.as_str() {
            "xyz" | "txt" => Ok(Self::Xyz),
            "ply" => Ok(Self::Ply),
            "bin" | "f32" => Ok(Self::RawF32),
            _ => Err(Error::UnsupportedFormat(path.to_path_buf())),
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct Sidecar {
    n: usize,
}

/// `cloud.bin` is described by `cloud.bin.json`.
pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

fn shape_id(path: &Path) -> String {
    path.file_stem().and_then(|s| s.to_str()).unwrap_or("cloud").to_string()
}

fn malformed(path: &Path, line: usize, reason: impl Into<String>) -> Error {
    Error::Malformed {
        path: path.to_path_buf(),
        line,
        reason: reason.into(),
    }
}

fn read_xyz(path: &Path) -> Result<Vec<Point3>> {
    let text = fs::read_to_string(path)?;
    let mut pts = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let t: Vec<&str> = line.split_whitespace().collect();
        if t.len() < 3 {
            return Err(malformed(path, n + 1, format!("expected 3 coordinates, found {}", t.len())));
        }
        let mut p = [0.0; 3];
        for k in 0..3 {
            p[k] = t[k]
                .parse()
                .map_err(|_| malformed(path, n + 1, format!("bad number `{}`", t[k])))?;
        }
        pts.push(p);
    }
    Ok(pts)
}

fn read_raw(path: &Path) -> Result<Vec<Point3>> {
    let side = sidecar_path(path);
    let meta: Sidecar = match fs::read_to_string(&side) {
        Ok(s) => serde_json::from_str(&s)?,
        Err(_) => return Err(malformed(path, 0, format!("missing sidecar {}", side.display()))),
    };
    let bytes = fs::read(path)?;
    if bytes.len() != meta.n * 12 {
        return Err(malformed(path, 0, format!("{} bytes for {} points", bytes.len(), meta.n)));
    }
    Ok(bytes
        .chunks_exact(12)
        .map(|c| {
            let f = |i: usize| f32::from_le_bytes([c[i], c[i + 1], c[i + 2], c[i + 3]]) as f64;
            [f(0), f(4), f(8)]
        })
        .collect())
}

/// Loads a cloud in the raw frame; its id is the file stem.
pub fn load_cloud(path: &Path) -> Result<PointCloud> {
    let pts = match CloudFormat::from_path(path)? {
        CloudFormat::Xyz => read_xyz(path)?,
        CloudFormat::Ply => read_ply(path)?.vertices,
        CloudFormat::RawF32 => read_raw(path)?,
    };
    if pts.iter().flatten().any(|v| v.is_nan()) {
        return Err(Error::NanCoordinate(path.to_path_buf()));
    }
    if let Some(i) = pts.iter().position(|p| p.iter().any(|v| !v.is_finite())) {
        return Err(malformed(path, 0, format!("infinite coordinate at point {i}")));
    }
    PointCloud::new(shape_id(path), pts)
}

/// Writes `cloud` in the format implied by the extension. Ascii xyz keeps
/// full precision; the other formats store float32.
pub fn write_cloud(path: &Path, cloud: &PointCloud) -> Result<()> {
    match CloudFormat::from_path(path)? {
        CloudFormat::Xyz => {
            let mut s = String::with_capacity(cloud.len() * 48);
            for p in cloud.points() {
                s.push_str(&format!("{} {} {}\n", p[0], p[1], p[2]));
            }
            fs::write(path, s)?;
        }
        CloudFormat::Ply => write_ply(path, cloud.points(), None, PlyEncoding::BinaryLittleEndian)?,
        CloudFormat::RawF32 => {
            let mut buf = Vec::with_capacity(cloud.len() * 12);
            for p in cloud.points() {
                for v in p {
                    buf.extend_from_slice(&(*v as f32).to_le_bytes());
                }
            }
            fs::write(path, buf)?;
            fs::write(sidecar_path(path), serde_json::to_string(&Sidecar { n: cloud.len() })?)?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn xyz_parse_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.xyz");
        fs::write(&path, "0.1 0.2 0.3\n# c\n\n-1 2.5 1e-3\n4 5 6\n").unwrap();
        let c = load_cloud(&path).unwrap();
        assert_eq!(c.points(), &[[0.1, 0.2, 0.3], [-1.0, 2.5, 1e-3], [4.0, 5.0, 6.0]]);
        assert_eq!(c.id, "a");
    }

    #[test]
    fn rejects_bad_inputs() {
        let dir = tempfile::tempdir().unwrap();
        let nan = dir.path().join("n.xyz");
        fs::write(&nan, "0 0 0\n1 nan 2\n").unwrap();
        assert!(matches!(load_cloud(&nan), Err(Error::NanCoordinate(_))));
        let short = dir.path().join("s.xyz");
        fs::write(&short, "0 0 0\n1 2\n").unwrap();
        assert!(matches!(load_cloud(&short), Err(Error::Malformed { line: 2, .. })));
        let word = dir.path().join("w.xyz");
        fs::write(&word, "0 zero 0\n").unwrap();
        assert!(matches!(load_cloud(&word), Err(Error::Malformed { line: 1, .. })));
        assert!(matches!(load_cloud(&dir.path().join("x.stl")), Err(Error::UnsupportedFormat(_))));
        let raw = dir.path().join("r.bin");
        fs::write(&raw, [0u8; 12]).unwrap();
        assert!(matches!(load_cloud(&raw), Err(Error::Malformed { .. })));
        fs::write(sidecar_path(&raw), r#"{"n": 2}"#).unwrap();
        assert!(matches!(load_cloud(&raw), Err(Error::Malformed { .. })));
    }

    #[test]
    fn roundtrip_every_format() {
        let dir = tempfile::tempdir().unwrap();
        let c = PointCloud::new("c", vec![[0.1, -0.2, 0.3], [1.5, 2.25, -3.0], [1e-4, 7.0, 0.0]]).unwrap();
        for name in ["c.xyz", "c.ply", "c.bin", "c.f32"] {
            let path = dir.path().join(name);
            write_cloud(&path, &c).unwrap();
            let back = load_cloud(&path).unwrap();
            for (a, b) in back.points().iter().zip(c.points()) {
                for k in 0..3 {
                    assert_eq!(a[k] as f32, b[k] as f32, "{name}");
                }
            }
        }
    }
}
