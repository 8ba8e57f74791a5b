//! Dataset specification, loading, annotations, and splits.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::io::{load_cloud, CloudFormat};
use super::mesh::{load_mesh, sample_mesh};
use super::ply::read_ply;
use super::synth::{synth_family, SynthFamilyParams};
use crate::error::{Error, Result};
use crate::geometry::{normalize_unit_cube, resample_to, NormalizeTransform, Point3, PointCloud};
use crate::losses::shape_seed;

/// File name of the per-directory annotation file.
pub const ANNOTATION_FILE: &str = "annotations.json";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LabeledPoint {
    pub label: u32,
    pub xyz: Point3,
}

/// Labeled keypoints per shape id.
pub type Annotations = BTreeMap<String, Vec<LabeledPoint>>;

pub fn load_annotations(path: &Path) -> Result<Annotations> {
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}

pub fn save_annotations(path: &Path, ann: &Annotations) -> Result<()> {
    fs::write(path, serde_json::to_string_pretty(ann)?)?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum DatasetSource {
    /// Cloud and mesh files under `root`, or `root/category` when given.
    Directory { root: PathBuf, category: Option<String> },
    Synthetic(SynthFamilyParams),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSpec {
    pub source: DatasetSource,
    /// Points per shape after resampling.
    pub points: usize,
    /// Train, validation, and test fractions.
    pub split: [f64; 3],
    pub split_seed: u64,
}

impl Default for DatasetSpec {
    fn default() -> Self {
        Self {
            source: DatasetSource::Synthetic(SynthFamilyParams::default()),
            points: 2048,
            split: [0.8, 0.1, 0.1],
            split_seed: 0,
        }
    }
}

impl DatasetSpec {
    pub fn validate(&self) -> Result<()> {
        if self.points == 0 {
            return Err(Error::InvalidArgument("points per shape must be at least 1".into()));
        }
        let sum: f64 = self.split.iter().sum();
        if self.split.iter().any(|f| !(*f >= 0.0)) || (sum - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidArgument(format!("split fractions {:?} must be nonnegative and sum to 1", self.split)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Shape {
    /// The normalized cloud; its id names the shape.
    pub cloud: PointCloud,
    /// Maps raw coordinates into the normalized frame.
    pub transform: NormalizeTransform,
    /// Labeled keypoints in the normalized frame.
    pub labels: Option<Vec<LabeledPoint>>,
    /// Index map onto the reference frame of a deformation sequence.
    pub correspondence: Option<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub shapes: Vec<Shape>,
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Val,
    Test,
    All,
}

impl Dataset {
    pub fn indices(&self, split: Split) -> Vec<usize> {
        match split {
            Split::Train => self.train.clone(),
            Split::Val => self.val.clone(),
            Split::Test => self.test.clone(),
            Split::All => (0..self.shapes.len()).collect(),
        }
    }

    pub fn find(&self, id: &str) -> Option<&Shape> {
        self.shapes.iter().find(|s| s.cloud.id == id)
    }
}

/// Disjoint, sorted train/val/test index sets, stable for a given seed.
pub fn split_indices(n: usize, fractions: [f64; 3], seed: u64) -> [Vec<usize>; 3] {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_train = ((n as f64) * fractions[0]).round() as usize;
    let n_val = (((n as f64) * fractions[1]).round() as usize).min(n - n_train.min(n));
    let n_train = n_train.min(n);
    let mut parts = [
        order[..n_train].to_vec(),
        order[n_train..n_train + n_val].to_vec(),
        order[n_train + n_val..].to_vec(),
    ];
    for p in &mut parts {
        p.sort_unstable();
    }
    parts
}

fn prepare(raw: PointCloud, points: usize) -> Result<(PointCloud, NormalizeTransform)> {
    let raw = if raw.len() == points { raw } else { resample_to(&raw, points)? };
    normalize_unit_cube(&raw)
}

fn is_mesh(path: &Path) -> Result<bool> {
    let ext = path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase);
    Ok(match ext.as_deref() {
        Some("obj") => true,
        Some("ply") => !read_ply(path)?.faces.is_empty(),
        _ => false,
    })
}

fn load_directory(dir: &Path, points: usize) -> Result<Vec<Shape>> {
    if !dir.is_dir() {
        return Err(Error::DatasetMissing(dir.to_path_buf()));
    }
    let mut files: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file())
        .filter(|p| {
            let ext = p.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase);
            ext.as_deref() == Some("obj") || CloudFormat::from_path(p).is_ok()
        })
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(Error::DatasetMissing(dir.to_path_buf()));
    }
    let ann_path = dir.join(ANNOTATION_FILE);
    let annotations = if ann_path.is_file() { Some(load_annotations(&ann_path)?) } else { None };
    let mut shapes = Vec::with_capacity(files.len());
    for path in files {
        let id = path.file_stem().and_then(|s| s.to_str()).unwrap_or("shape").to_string();
        let mut raw = if is_mesh(&path)? {
            let mesh = load_mesh(&path)?;
            sample_mesh(&mesh.vertices, &mesh.faces, points, shape_seed(&id, usize::MAX) as u64)?
        } else {
            load_cloud(&path)?
        };
        raw.id = id.clone();
        let (cloud, transform) = prepare(raw, points)?;
        let labels = annotations.as_ref().and_then(|a| a.get(&id)).map(|ls| {
            ls.iter()
                .map(|l| LabeledPoint {
                    label: l.label,
                    xyz: transform.apply(l.xyz),
                })
                .collect()
        });
        shapes.push(Shape {
            cloud,
            transform,
            labels,
            correspondence: None,
        });
    }
    Ok(shapes)
}

pub fn load_dataset(spec: &DatasetSpec) -> Result<Dataset> {
    spec.validate()?;
    let shapes = match &spec.source {
        DatasetSource::Directory { root, category } => {
            let dir = match category {
                Some(c) => root.join(c),
                None => root.clone(),
            };
            load_directory(&dir, spec.points)?
        }
        DatasetSource::Synthetic(params) => {
            let params = SynthFamilyParams {
                points: spec.points,
                ..*params
            };
            synth_family(&params)?
                .into_iter()
                .map(|f| {
                    let (cloud, transform) = normalize_unit_cube(&f.cloud)?;
                    Ok(Shape {
                        cloud,
                        transform,
                        labels: None,
                        correspondence: Some(f.correspondence),
                    })
                })
                .collect::<Result<_>>()?
        }
    };
    let [train, val, test] = split_indices(shapes.len(), spec.split, spec.split_seed);
    Ok(Dataset { shapes, train, val, test })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::io::write_cloud;

    #[test]
    fn splits_are_disjoint_and_stable() {
        let [a, b, c] = split_indices(37, [0.7, 0.1, 0.2], 5);
        assert_eq!(a.len() + b.len() + c.len(), 37);
        let mut all: Vec<usize> = a.iter().chain(&b).chain(&c).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..37).collect::<Vec<_>>());
        assert_eq!(split_indices(37, [0.7, 0.1, 0.2], 5), [a, b, c]);
        assert_eq!(split_indices(4, [1.0, 0.0, 0.0], 1)[0].len(), 4);
    }

    #[test]
    fn synthetic_dataset_is_normalized() {
        let spec = DatasetSpec {
            points: 128,
            source: DatasetSource::Synthetic(SynthFamilyParams {
                frames: 4,
                ..Default::default()
            }),
            ..Default::default()
        };
        let d = load_dataset(&spec).unwrap();
        assert_eq!(d.shapes.len(), 4);
        for s in &d.shapes {
            assert_eq!(s.cloud.len(), 128);
            s.cloud.ensure_frame(crate::geometry::Frame::UnitCube).unwrap();
            assert!(s.correspondence.is_some());
        }
    }

    #[test]
    fn directory_dataset_with_annotations() {
        let dir = tempfile::tempdir().unwrap();
        let cat = dir.path().join("mugs");
        fs::create_dir(&cat).unwrap();
        let pts: Vec<Point3> = (0..50).map(|i| [i as f64 * 0.1, (i % 7) as f64, (i % 3) as f64]).collect();
        write_cloud(&cat.join("m1.xyz"), &PointCloud::new("x", pts.clone()).unwrap()).unwrap();
        fs::write(cat.join("m2.obj"), "v 0 0 0\nv 2 0 0\nv 2 2 0\nv 0 2 1\nf 1 2 3 4\n").unwrap();
        let mut ann = Annotations::new();
        ann.insert("m1".into(), vec![LabeledPoint { label: 3, xyz: pts[0] }]);
        save_annotations(&cat.join(ANNOTATION_FILE), &ann).unwrap();
        let spec = DatasetSpec {
            source: DatasetSource::Directory {
                root: dir.path().into(),
                category: Some("mugs".into()),
            },
            points: 40,
            ..Default::default()
        };
        let d = load_dataset(&spec).unwrap();
        assert_eq!(d.shapes.len(), 2);
        let m1 = d.find("m1").unwrap();
        assert_eq!(m1.cloud.len(), 40);
        let l = &m1.labels.as_ref().unwrap()[0];
        assert_eq!(l.label, 3);
        assert_eq!(l.xyz, m1.transform.apply(pts[0]));
        assert!(d.find("m2").unwrap().labels.is_none());
        let missing = DatasetSpec {
            source: DatasetSource::Directory {
                root: dir.path().join("nope"),
                category: None,
            },
            ..Default::default()
        };
        assert!(matches!(load_dataset(&missing), Err(Error::DatasetMissing(_))));
    }
}
