//! Binary checkpoints: magic, JSON header, then little-endian f64 tensors.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::TrainConfig;
use super::optim::{Adam, AdamParams};
use crate::autograd::Matrix;
use crate::error::{Error, Result};
use crate::model::{NamedMatrix, ParamStore};

pub const MAGIC: &[u8; 8] = b"KEYGRID1";
const VERSION: u32 = 1;

/// Loss components of one epoch, averaged over its samples.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub l_sim: f64,
    pub l_far: f64,
    pub l_total: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub config: TrainConfig,
    /// Number of completed epochs.
    pub epoch: usize,
    pub history: Vec<EpochLog>,
    pub params: ParamStore,
    pub optimizer: Option<Adam>,
}

#[derive(Debug, Serialize, Deserialize, PartialEq, Eq, Clone, Copy)]
#[serde(rename_all = "snake_case")]
enum Kind {
    Param,
    Buffer,
    AdamM,
    AdamV,
}

#[derive(Debug, Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    kind: Kind,
    rows: usize,
    cols: usize,
    offset: usize,
}

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    version: u32,
    config: TrainConfig,
    epoch: usize,
    history: Vec<EpochLog>,
    adam: Option<(AdamParams, u64)>,
    tensors: Vec<TensorEntry>,
}

fn corrupt(msg: impl Into<String>) -> Error {
    Error::CorruptCheckpoint(msg.into())
}

pub fn save_checkpoint(path: &Path, ckpt: &Checkpoint) -> Result<()> {
    let mut tensors = Vec::new();
    let mut blob: Vec<u8> = Vec::new();
    let mut offset = 0;
    let mut push = |name: &str, kind: Kind, m: &Matrix| {
        tensors.push(TensorEntry {
            name: name.to_string(),
            kind,
            rows: m.nrows(),
            cols: m.ncols(),
            offset,
        });
        offset += m.len();
        for v in m.iter() {
            blob.extend_from_slice(&v.to_le_bytes());
        }
    };
    for p in &ckpt.params.params {
        push(&p.name, Kind::Param, &p.value);
    }
    for b in &ckpt.params.buffers {
        push(&b.name, Kind::Buffer, &b.value);
    }
    if let Some(adam) = &ckpt.optimizer {
        for (p, (m, v)) in ckpt.params.params.iter().zip(adam.m.iter().zip(&adam.v)) {
            push(&p.name, Kind::AdamM, m);
            push(&p.name, Kind::AdamV, v);
        }
    }
    let header = Header {
        version: VERSION,
        config: ckpt.config.clone(),
        epoch: ckpt.epoch,
        history: ckpt.history.clone(),
        adam: ckpt.optimizer.as_ref().map(|a| (a.hyper, a.step)),
        tensors,
    };
    let json = serde_json::to_vec(&header)?;
    let mut out = Vec::with_capacity(16 + json.len() + blob.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(json.len() as u64).to_le_bytes());
    out.extend_from_slice(&json);
    out.extend_from_slice(&blob);
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, out)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let bytes = fs::read(path)?;
    if bytes.len() < 16 || &bytes[..8] != MAGIC {
        return Err(corrupt("bad magic"));
    }
    let len = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes")) as usize;
    let body = 16usize.checked_add(len).filter(|&e| e <= bytes.len()).ok_or_else(|| corrupt("truncated header"))?;
    let header: Header = serde_json::from_slice(&bytes[16..body]).map_err(|e| corrupt(format!("header: {e}")))?;
    if header.version != VERSION {
        return Err(corrupt(format!("unsupported version {}", header.version)));
    }
    let total: usize = header.tensors.iter().map(|t| t.rows * t.cols).sum();
    if bytes.len() - body != total * 8 {
        return Err(corrupt(format!("expected {} tensor bytes, found {}", total * 8, bytes.len() - body)));
    }
    let read = |t: &TensorEntry| -> Result<Matrix> {
        let start = body + t.offset * 8;
        let end = start + t.rows * t.cols * 8;
        let slice = bytes.get(start..end).ok_or_else(|| corrupt(format!("tensor `{}` out of range", t.name)))?;
        let vals = slice.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
        Matrix::from_shape_vec((t.rows, t.cols), vals).map_err(|e| corrupt(e.to_string()))
    };
    let mut params = ParamStore::new();
    let mut m = Vec::new();
    let mut v = Vec::new();
    for t in &header.tensors {
        let value = read(t)?;
        match t.kind {
            Kind::Param => params.params.push(NamedMatrix { name: t.name.clone(), value }),
            Kind::Buffer => params.buffers.push(NamedMatrix { name: t.name.clone(), value }),
            Kind::AdamM => m.push(value),
            Kind::AdamV => v.push(value),
        }
    }
    let optimizer = match header.adam {
        Some((hyper, step)) => {
            if m.len() != params.params.len() || v.len() != params.params.len() {
                return Err(corrupt("optimizer state does not cover every parameter"));
            }
            Some(Adam { hyper, step, m, v })
        }
        None => None,
    };
    Ok(Checkpoint {
        config: header.config,
        epoch: header.epoch,
        history: header.history,
        params,
        optimizer,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn sample() -> Checkpoint {
        let mut params = ParamStore::new();
        params.add_param("a", array![[1.0, f64::MIN_POSITIVE], [-0.0, 1e300]]);
        params.add_param("b", array![[std::f64::consts::PI]]);
        params.add_buffer("mean", array![[0.25, 0.5]]);
        let mut adam = Adam::new(AdamParams::with_lr(1e-3), &params);
        adam.step = 7;
        adam.m[0][[1, 1]] = 3.5;
        Checkpoint {
            config: TrainConfig::default(),
            epoch: 2,
            history: vec![EpochLog { epoch: 0, l_sim: 0.5, l_far: 0.25, l_total: 0.25 }],
            params,
            optimizer: Some(adam),
        }
    }

    #[test]
    fn roundtrip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.ckpt");
        let ckpt = sample();
        save_checkpoint(&path, &ckpt).unwrap();
        let back = load_checkpoint(&path).unwrap();
        assert_eq!(back, ckpt);
        for (a, b) in back.params.params.iter().zip(&ckpt.params.params) {
            for (x, y) in a.value.iter().zip(b.value.iter()) {
                assert_eq!(x.to_bits(), y.to_bits());
            }
        }
    }

    #[test]
    fn rejects_bad_magic_and_truncation() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.ckpt");
        save_checkpoint(&path, &sample()).unwrap();
        let bytes = fs::read(&path).unwrap();
        let mut wrong = bytes.clone();
        wrong[0] = b'X';
        fs::write(&path, &wrong).unwrap();
        let e = load_checkpoint(&path).unwrap_err();
        assert!(e.to_string().contains("corrupt checkpoint"));
        fs::write(&path, &bytes[..bytes.len() - 3]).unwrap();
        assert!(matches!(load_checkpoint(&path), Err(Error::CorruptCheckpoint(_))));
        fs::write(&path, &bytes[..20]).unwrap();
        assert!(matches!(load_checkpoint(&path), Err(Error::CorruptCheckpoint(_))));
    }
}
