//! The epoch loop.

use std::fs::{self, File};
use std::io::Write;
use std::path::PathBuf;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::checkpoint::{save_checkpoint, Checkpoint, EpochLog};
use super::config::TrainConfig;
use super::optim::{Adam, AdamParams};
use crate::autograd::{Graph, Matrix};
use crate::data::{load_dataset, Dataset};
use crate::error::{Error, Result};
use crate::geometry::Point3;
use crate::losses::{farthest_targets, loss_vars, shape_seed};
use crate::model::{CloudGeometry, KeyGrid, Mode};

pub const CHECKPOINT_FILE: &str = "checkpoint.ckpt";
pub const DIAGNOSTIC_FILE: &str = "diagnostic.ckpt";
pub const LOG_FILE: &str = "metrics.jsonl";

struct Sample {
    geometry: CloudGeometry,
    targets: Vec<Point3>,
}

/// Mean loss components of one optimizer step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepLoss {
    pub l_sim: f64,
    pub l_far: f64,
    pub l_total: f64,
    pub grad_norm: f64,
}

pub struct Trainer {
    pub config: TrainConfig,
    pub model: KeyGrid,
    pub optimizer: Adam,
    /// Completed epochs.
    pub epoch: usize,
    pub history: Vec<EpochLog>,
    pub dataset: Dataset,
    samples: Vec<Sample>,
}

fn epoch_rng(seed: u64, epoch: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ (epoch as u64).wrapping_add(1).wrapping_mul(0x9e37_79b9_7f4a_7c15))
}

impl Trainer {
    /// Loads the dataset and initializes the model from `config.seed`.
    pub fn new(config: TrainConfig) -> Result<Self> {
        config.validate()?;
        let dataset = load_dataset(&config.dataset)?;
        let model = KeyGrid::new(config.model.clone(), config.seed)?;
        let optimizer = Adam::new(AdamParams::with_lr(config.learning_rate), &model.params);
        Self::assemble(config, model, optimizer, 0, Vec::new(), dataset)
    }

    pub fn from_checkpoint(ckpt: Checkpoint) -> Result<Self> {
        ckpt.config.validate()?;
        let dataset = load_dataset(&ckpt.config.dataset)?;
        let model = KeyGrid::with_params(ckpt.config.model.clone(), ckpt.params)?;
        let optimizer = ckpt
            .optimizer
            .unwrap_or_else(|| Adam::new(AdamParams::with_lr(ckpt.config.learning_rate), &model.params));
        Self::assemble(ckpt.config, model, optimizer, ckpt.epoch, ckpt.history, dataset)
    }

    fn assemble(
        config: TrainConfig,
        model: KeyGrid,
        optimizer: Adam,
        epoch: usize,
        history: Vec<EpochLog>,
        dataset: Dataset,
    ) -> Result<Self> {
        if dataset.train.is_empty() {
            return Err(Error::InvalidArgument("the training split is empty".into()));
        }
        let samples = dataset
            .shapes
            .iter()
            .map(|s| {
                let n = s.cloud.len();
                Ok(Sample {
                    geometry: model.geometry(&s.cloud)?,
                    targets: farthest_targets(&s.cloud, config.loss.farthest_points, shape_seed(&s.cloud.id, n))?,
                })
            })
            .collect::<Result<_>>()?;
        Ok(Self {
            config,
            model,
            optimizer,
            epoch,
            history,
            dataset,
            samples,
        })
    }

    /// One optimizer step on the given shape indices, with the loss schedule of `epoch`.
    pub fn step(&mut self, batch: &[usize], epoch: usize) -> Result<StepLoss> {
        let mut g = Graph::new();
        let geos: Vec<&CloudGeometry> = batch.iter().map(|&i| &self.samples[i].geometry).collect();
        let pass = self.model.forward(&mut g, &geos, Mode::Train)?;
        let mut totals = Vec::with_capacity(batch.len());
        let (mut l_sim, mut l_far, mut l_total) = (0.0, 0.0, 0.0);
        for (s, &i) in pass.samples.iter().zip(batch) {
            let cloud = self.samples[i].geometry.coords[0].clone();
            let v = loss_vars(&mut g, s.reconstruction, s.keypoints, &cloud, &self.samples[i].targets, epoch, &self.config.loss)?;
            l_sim += g.scalar(v.l_sim);
            l_far += g.scalar(v.l_far);
            l_total += g.scalar(v.total);
            totals.push(v.total);
        }
        let mut total = totals[0];
        for &t in &totals[1..] {
            total = g.add(total, t);
        }
        let total = g.scale(total, 1.0 / batch.len() as f64);
        let b = batch.len() as f64;
        let (l_sim, l_far, l_total) = (l_sim / b, l_far / b, l_total / b);
        if !(l_total.is_finite() && l_sim.is_finite() && l_far.is_finite()) {
            return Err(Error::NonFiniteLoss {
                epoch,
                detail: format!("l_sim={l_sim} l_far={l_far} l_total={l_total}"),
            });
        }
        let mut grads = g.backward(total);
        let grads: Vec<Matrix> = pass
            .params
            .iter()
            .zip(&self.model.params.params)
            .map(|(&v, p)| grads.take(v).unwrap_or_else(|| Matrix::zeros(p.value.raw_dim())))
            .collect();
        let grad_norm = self.optimizer.update(&mut self.model.params, &grads, self.config.clip_norm)?;
        self.model.update_running_stats(&pass);
        if !self.model.params.all_finite() {
            return Err(Error::NonFiniteLoss {
                epoch,
                detail: "parameters became non-finite".into(),
            });
        }
        Ok(StepLoss {
            l_sim,
            l_far,
            l_total,
            grad_norm,
        })
    }

    /// Runs the next epoch over the shuffled training split.
    pub fn run_epoch(&mut self) -> Result<EpochLog> {
        let epoch = self.epoch;
        let mut order = self.dataset.train.clone();
        order.shuffle(&mut epoch_rng(self.config.seed, epoch));
        let (mut s, mut f, mut t) = (0.0, 0.0, 0.0);
        for batch in order.chunks(self.config.batch_size) {
            let l = self.step(batch, epoch)?;
            let w = batch.len() as f64;
            s += l.l_sim * w;
            f += l.l_far * w;
            t += l.l_total * w;
        }
        let n = order.len() as f64;
        let log = EpochLog {
            epoch,
            l_sim: s / n,
            l_far: f / n,
            l_total: t / n,
        };
        self.history.push(log);
        self.epoch += 1;
        Ok(log)
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint {
            config: self.config.clone(),
            epoch: self.epoch,
            history: self.history.clone(),
            params: self.model.params.clone(),
            optimizer: Some(self.optimizer.clone()),
        }
    }

    /// Runs the remaining epochs up to `config.epochs`, writing the log and a
    /// checkpoint under `output_dir` after each. `on_epoch` sees every entry.
    pub fn run(&mut self, mut on_epoch: impl FnMut(&EpochLog)) -> Result<PathBuf> {
        let dir = self.config.output_dir.clone();
        fs::create_dir_all(&dir)?;
        let ckpt_path = dir.join(CHECKPOINT_FILE);
        let mut log = File::create(dir.join(LOG_FILE))?;
        for entry in &self.history {
            writeln!(log, "{}", serde_json::to_string(entry)?)?;
        }
        while self.epoch < self.config.epochs {
            match self.run_epoch() {
                Ok(entry) => {
                    writeln!(log, "{}", serde_json::to_string(&entry)?)?;
                    log.flush()?;
                    save_checkpoint(&ckpt_path, &self.checkpoint())?;
                    on_epoch(&entry);
                }
                Err(e @ Error::NonFiniteLoss { .. }) => {
                    save_checkpoint(&dir.join(DIAGNOSTIC_FILE), &self.checkpoint())?;
                    return Err(e);
                }
                Err(e) => return Err(e),
            }
        }
        if !ckpt_path.exists() {
            save_checkpoint(&ckpt_path, &self.checkpoint())?;
        }
        Ok(ckpt_path)
    }
}

/// Trains from scratch and returns the checkpoint path.
pub fn train(config: TrainConfig) -> Result<PathBuf> {
    Trainer::new(config)?.run(|_| {})
}

/// Reads a metrics log written by [`Trainer::run`].
pub fn read_log(path: &std::path::Path) -> Result<Vec<EpochLog>> {
    fs::read_to_string(path)?
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| Ok(serde_json::from_str(l)?))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{DatasetSource, SynthFamilyParams};
    use crate::model::ModelConfig;

    pub(crate) fn tiny_config(dir: &std::path::Path, epochs: usize) -> TrainConfig {
        let mut model = ModelConfig::small(64, 4);
        model.level_widths = vec![8, 8, 12, 12];
        model.propagation_widths = vec![8, 8, 8, 8];
        model.decoder_widths = vec![8, 8, 8, 8, 8];
        model.segment_hidden = 8;
        model.group_size = 8;
        model.grid_size = 6;
        let mut cfg = TrainConfig {
            epochs,
            batch_size: 2,
            model,
            output_dir: dir.to_path_buf(),
            ..Default::default()
        };
        cfg.dataset.points = 64;
        cfg.dataset.source = DatasetSource::Synthetic(SynthFamilyParams {
            frames: 4,
            points: 64,
            ..Default::default()
        });
        cfg.dataset.split = [1.0, 0.0, 0.0];
        cfg.loss = crate::losses::LossConfig::for_keypoints(4);
        cfg.loss.warmup_epochs = 1;
        cfg
    }

    #[test]
    fn writes_log_and_checkpoint() {
        let dir = tempfile::tempdir().unwrap();
        let path = train(tiny_config(dir.path(), 2)).unwrap();
        assert!(path.exists());
        let log = read_log(&dir.path().join(LOG_FILE)).unwrap();
        assert_eq!(log.len(), 2);
        assert_eq!(log[0].l_total, log[0].l_far);
        assert!(log[0].l_sim > 0.0);
        assert!((log[1].l_total - log[1].l_sim - log[1].l_far).abs() < 1e-9);
    }

    #[test]
    fn empty_train_split_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = tiny_config(dir.path(), 1);
        cfg.dataset.split = [0.0, 0.0, 1.0];
        assert!(Trainer::new(cfg).is_err());
    }

    #[test]
    fn same_seed_same_losses_and_resume_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let mut a = Trainer::new(tiny_config(dir.path(), 2)).unwrap();
        a.run_epoch().unwrap();
        a.run_epoch().unwrap();
        let mut b = Trainer::new(tiny_config(dir.path(), 2)).unwrap();
        b.run_epoch().unwrap();
        let path = dir.path().join("half.ckpt");
        save_checkpoint(&path, &b.checkpoint()).unwrap();
        let mut c = Trainer::from_checkpoint(crate::training::load_checkpoint(&path).unwrap()).unwrap();
        c.run_epoch().unwrap();
        assert_eq!(a.history, c.history);
        assert_eq!(a.model.params, c.model.params);
        assert_eq!(a.optimizer, c.optimizer);
    }
}
