//! Adam with optional global-norm gradient clipping.

use serde::{Deserialize, Serialize};

use crate::autograd::Matrix;
use crate::error::{Error, Result};
use crate::model::ParamStore;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamParams {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamParams {
    pub fn with_lr(lr: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub hyper: AdamParams,
    pub step: u64,
    pub m: Vec<Matrix>,
    pub v: Vec<Matrix>,
}

pub fn global_norm(grads: &[Matrix]) -> f64 {
    grads.iter().flat_map(|g| g.iter()).map(|v| v * v).sum::<f64>().sqrt()
}

impl Adam {
    pub fn new(hyper: AdamParams, params: &ParamStore) -> Self {
        let zeros: Vec<Matrix> = params.params.iter().map(|p| Matrix::zeros(p.value.raw_dim())).collect();
        Self {
            hyper,
            step: 0,
            m: zeros.clone(),
            v: zeros,
        }
    }

    /// Applies one update and returns the gradient norm before clipping.
    pub fn update(&mut self, params: &mut ParamStore, grads: &[Matrix], clip_norm: Option<f64>) -> Result<f64> {
        if grads.len() != params.params.len() || grads.len() != self.m.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} gradients for {} parameters",
                grads.len(),
                params.params.len()
            )));
        }
        let norm = global_norm(grads);
        let factor = match clip_norm {
            Some(c) if norm > c => c / norm,
            _ => 1.0,
        };
        self.step += 1;
        let AdamParams { lr, beta1, beta2, eps } = self.hyper;
        let bc1 = 1.0 - beta1.powi(self.step as i32);
        let bc2 = 1.0 - beta2.powi(self.step as i32);
        for (((p, g), m), v) in params.params.iter_mut().zip(grads).zip(&mut self.m).zip(&mut self.v) {
            ndarray::Zip::from(&mut p.value).and(g).and(m).and(v).for_each(|p, &g, m, v| {
                let g = g * factor;
                *m = beta1 * *m + (1.0 - beta1) * g;
                *v = beta2 * *v + (1.0 - beta2) * g * g;
                *p -= lr * (*m / bc1) / ((*v / bc2).sqrt() + eps);
            });
        }
        Ok(norm)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn first_step_moves_by_learning_rate() {
        let mut store = ParamStore::new();
        store.add_param("w", array![[1.0, -2.0]]);
        let mut adam = Adam::new(AdamParams::with_lr(0.1), &store);
        adam.update(&mut store, &[array![[3.0, -0.5]]], None).unwrap();
        let w = &store.params[0].value;
        assert!((w[[0, 0]] - 0.9).abs() < 1e-6);
        assert!((w[[0, 1]] + 1.9).abs() < 1e-6);
    }

    #[test]
    fn clipping_rescales_large_gradients() {
        let grads = [array![[30.0, 40.0]]];
        assert_eq!(global_norm(&grads), 50.0);
        let mut store = ParamStore::new();
        store.add_param("w", array![[0.0, 0.0]]);
        let mut adam = Adam::new(AdamParams::with_lr(1.0), &store);
        let n = adam.update(&mut store, &grads, Some(10.0)).unwrap();
        assert_eq!(n, 50.0);
        assert!((adam.m[0][[0, 0]] - 0.1 * 6.0).abs() < 1e-12);
    }

    #[test]
    fn minimizes_a_quadratic() {
        let mut store = ParamStore::new();
        store.add_param("x", array![[5.0]]);
        let mut adam = Adam::new(AdamParams::with_lr(0.1), &store);
        for _ in 0..500 {
            let x = store.params[0].value[[0, 0]];
            adam.update(&mut store, &[array![[2.0 * (x - 1.0)]]], None).unwrap();
        }
        assert!((store.params[0].value[[0, 0]] - 1.0).abs() < 1e-2);
    }
}
