//! Softmax regression with exact per-example cross-entropy gradients, trained
//! by plain SGD with batch size 1.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub n_classes: usize,
    pub feature_dim: usize,
    /// Row-major `n_classes x feature_dim`.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl ModelParams {
    pub fn zeros(n_classes: usize, feature_dim: usize) -> Self {
        ModelParams {
            n_classes,
            feature_dim,
            weights: vec![0.0; n_classes * feature_dim],
            bias: vec![0.0; n_classes],
        }
    }

    /// Length of a flattened gradient: weights, then bias.
    pub fn num_params(&self) -> usize {
        self.n_classes * (self.feature_dim + 1)
    }

    pub fn is_finite(&self) -> bool {
        self.weights.iter().chain(&self.bias).all(|v| v.is_finite())
    }

    pub fn logits(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.feature_dim);
        self.weights
            .chunks_exact(self.feature_dim)
            .zip(&self.bias)
            .map(|(w, b)| w.iter().zip(x).fold(*b, |acc, (wi, xi)| acc + wi * xi))
            .collect()
    }

    pub fn probabilities(&self, x: &[f64]) -> Vec<f64> {
        softmax(&self.logits(x))
    }

    /// Cross-entropy of label `y`.
    pub fn loss(&self, x: &[f64], y: usize) -> f64 {
        let z = self.logits(x);
        let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + z.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
        lse - z[y]
    }

    /// Highest-scoring class, lowest index on ties.
    pub fn predict(&self, x: &[f64]) -> usize {
        let z = self.logits(x);
        let mut best = 0;
        for (c, &v) in z.iter().enumerate() {
            if v > z[best] {
                best = c;
            }
        }
        best
    }

    /// Flattens into `[weights..., bias...]`.
    pub fn flatten(&self) -> Vec<f64> {
        let mut v = self.weights.clone();
        v.extend_from_slice(&self.bias);
        v
    }

    pub fn from_flat(n_classes: usize, feature_dim: usize, flat: &[f64]) -> Self {
        let split = n_classes * feature_dim;
        ModelParams {
            n_classes,
            feature_dim,
            weights: flat[..split].to_vec(),
            bias: flat[split..].to_vec(),
        }
    }

    /// One SGD step on a single example: `theta <- theta - lr * grad`.
    pub fn sgd_step(&mut self, x: &[f64], y: usize, lr: f64) {
        let mut delta = self.probabilities(x);
        delta[y] -= 1.0;
        for (c, d) in delta.iter().enumerate() {
            let row = &mut self.weights[c * self.feature_dim..(c + 1) * self.feature_dim];
            for (w, xi) in row.iter_mut().zip(x) {
                *w -= lr * d * xi;
            }
            self.bias[c] -= lr * d;
        }
    }
}

pub fn softmax(z: &[f64]) -> Vec<f64> {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = z.iter().map(|v| (v - max).exp()).collect();
    let sum: f64 = e.iter().sum();
    e.into_iter().map(|v| v / sum).collect()
}

/// Gradient of the cross-entropy loss at `(x, y)`:
/// `(softmax - onehot(y)) x^T` for the weights, `softmax - onehot(y)` for the
/// bias, flattened weights first.
pub fn per_example_gradient(params: &ModelParams, x: &[f64], y: usize) -> Vec<f64> {
    let mut delta = params.probabilities(x);
    delta[y] -= 1.0;
    let mut g = Vec::with_capacity(params.num_params());
    for d in &delta {
        g.extend(x.iter().map(|xi| d * xi));
    }
    g.extend_from_slice(&delta);
    g
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainerConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub warmup_ratio: f64,
    pub seed: u64,
}

impl Default for TrainerConfig {
    fn default() -> Self {
        TrainerConfig {
            learning_rate: 0.1,
            epochs: 3,
            warmup_ratio: 0.05,
            seed: 0,
        }
    }
}

impl TrainerConfig {
    pub fn with_seed(seed: u64) -> Self {
        TrainerConfig {
            seed,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "learning rate {} must be finite and non-negative",
                self.learning_rate
            )));
        }
        if !(self.warmup_ratio > 0.0 && self.warmup_ratio <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "warmup ratio {} is outside (0, 1]",
                self.warmup_ratio
            )));
        }
        Ok(())
    }
}

/// Runs `epochs` passes of batch-size-1 SGD over `ids`, reshuffled each epoch
/// by an RNG seeded from `seed`. `ids` are sorted first so the result depends
/// only on the set of ids.
pub fn train_sgd(
    params: &mut ModelParams,
    features: impl Fn(usize) -> Vec<f64>,
    labels: &[usize],
    ids: &[usize],
    lr: f64,
    epochs: usize,
    seed: u64,
) -> Result<()> {
    let mut order = ids.to_vec();
    order.sort_unstable();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for epoch in 0..epochs {
        order.shuffle(&mut rng);
        for &i in &order {
            params.sgd_step(&features(i), labels[i], lr);
        }
        if !params.is_finite() {
            return Err(Error::Diverged(format!(
                "non-finite parameters after epoch {epoch} (lr {lr})"
            )));
        }
    }
    Ok(())
}
