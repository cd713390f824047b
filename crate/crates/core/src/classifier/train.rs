use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::mlp::{Gradients, Mlp};
use super::Dataset;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamParams {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamParams {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub adam: AdamParams,
    /// Training fraction when no separate test set is given.
    pub split: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 20,
            batch_size: 32,
            adam: AdamParams::default(),
            split: 0.8,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Mean training cross-entropy of each epoch.
    pub epoch_losses: Vec<f64>,
    pub train_accuracy: f64,
    /// `None` when there were no held-out rows.
    pub test_accuracy: Option<f64>,
    pub train_rows: usize,
    pub test_rows: usize,
}

struct Adam {
    params: AdamParams,
    step: i32,
    m: Gradients,
    v: Gradients,
}

impl Adam {
    fn new(mlp: &Mlp, params: AdamParams) -> Self {
        Self {
            params,
            step: 0,
            m: Gradients::zeros_like(mlp),
            v: Gradients::zeros_like(mlp),
        }
    }

    fn update(&mut self, mlp: &mut Mlp, g: &Gradients) {
        self.step += 1;
        let AdamParams { lr, beta1, beta2, eps } = self.params;
        let c1 = 1.0 - beta1.powi(self.step);
        let c2 = 1.0 - beta2.powi(self.step);
        let apply = |p: &mut [f64], g: &[f64], m: &mut [f64], v: &mut [f64]| {
            for i in 0..p.len() {
                m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
                v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
                p[i] -= lr * (m[i] / c1) / ((v[i] / c2).sqrt() + eps);
            }
        };
        for (li, layer) in mlp.layers_mut().iter_mut().enumerate() {
            apply(&mut layer.weights, &g.weights[li], &mut self.m.weights[li], &mut self.v.weights[li]);
            apply(&mut layer.bias, &g.bias[li], &mut self.m.bias[li], &mut self.v.bias[li]);
        }
    }
}

/// Fraction of rows whose argmax class (ties to the lowest index) matches
/// the label. Empty data yields 0.
pub fn accuracy(mlp: &Mlp, data: &Dataset) -> Result<f64> {
    accuracy_of(mlp, data, &(0..data.len()).collect::<Vec<_>>())
}

fn accuracy_of(mlp: &Mlp, data: &Dataset, idx: &[usize]) -> Result<f64> {
    if idx.is_empty() {
        return Ok(0.0);
    }
    let mut hits = 0usize;
    for &i in idx {
        let row = &data.rows()[i];
        if super::argmax(&mlp.scores(&row.features)?) == row.label {
            hits += 1;
        }
    }
    Ok(hits as f64 / idx.len() as f64)
}

fn validate(mlp: &Mlp, data: &Dataset, what: &'static str) -> Result<()> {
    if data.feature_dim() != mlp.input_dim() {
        return Err(Error::DimensionMismatch {
            context: what,
            expected: mlp.input_dim(),
            actual: data.feature_dim(),
        });
    }
    if data.classes() > mlp.classes() {
        return Err(Error::InvalidArgument(format!(
            "{what} has {} classes but the network outputs {}",
            data.classes(),
            mlp.classes()
        )));
    }
    Ok(())
}

/// Mini-batch Adam on the mean cross-entropy.
///
/// Without `test`, a seeded shuffle holds out `1 − split` of `data`.
/// Shuffling uses its own stream derived from `cfg.seed`, so a run is fully
/// determined by the initial network, the data and the config.
pub fn train(mlp: &mut Mlp, data: &Dataset, test: Option<&Dataset>, cfg: &TrainConfig) -> Result<TrainReport> {
    if data.is_empty() {
        return Err(Error::InvalidArgument("training data is empty".into()));
    }
    if cfg.batch_size == 0 {
        return Err(Error::InvalidArgument("batch size must be positive".into()));
    }
    if !(cfg.split > 0.0 && cfg.split <= 1.0) {
        return Err(Error::InvalidArgument(format!("split {} outside (0, 1]", cfg.split)));
    }
    validate(mlp, data, "training data")?;
    if let Some(t) = test {
        validate(mlp, t, "test data")?;
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let (mut train_idx, held_out) = if test.is_some() {
        (order, Vec::new())
    } else {
        order.shuffle(&mut rng);
        let cut = ((data.len() as f64 * cfg.split).round() as usize).clamp(1, data.len());
        let held = order.split_off(cut);
        (order, held)
    };

    let dim = mlp.input_dim();
    let mut adam = Adam::new(mlp, cfg.adam);
    let mut grads = Gradients::zeros_like(mlp);
    let mut epoch_losses = Vec::with_capacity(cfg.epochs);
    let mut inputs = Vec::with_capacity(cfg.batch_size * dim);
    let mut labels = Vec::with_capacity(cfg.batch_size);

    for epoch in 0..cfg.epochs {
        train_idx.shuffle(&mut rng);
        let mut total = 0.0;
        for chunk in train_idx.chunks(cfg.batch_size) {
            inputs.clear();
            labels.clear();
            for &i in chunk {
                let row = &data.rows()[i];
                inputs.extend_from_slice(&row.features);
                labels.push(row.label);
            }
            let trace = mlp.forward_batch(&inputs, chunk.len());
            let loss = Mlp::batch_loss(&trace, &labels);
            if !loss.is_finite() {
                return Err(Error::Diverged(epoch));
            }
            total += loss * chunk.len() as f64;
            mlp.backward(&trace, &labels, &mut grads);
            adam.update(mlp, &grads);
        }
        let mean = total / train_idx.len() as f64;
        let params_finite = mlp
            .layers()
            .iter()
            .all(|l| l.weights.iter().chain(&l.bias).all(|v| v.is_finite()));
        if !mean.is_finite() || !params_finite {
            return Err(Error::Diverged(epoch));
        }
        epoch_losses.push(mean);
    }

    let train_accuracy = accuracy_of(mlp, data, &train_idx)?;
    let (test_accuracy, test_rows) = match test {
        Some(t) if !t.is_empty() => (Some(accuracy(mlp, t)?), t.len()),
        Some(_) => (None, 0),
        None if held_out.is_empty() => (None, 0),
        None => (Some(accuracy_of(mlp, data, &held_out)?), held_out.len()),
    };
    Ok(TrainReport {
        epoch_losses,
        train_accuracy,
        test_accuracy,
        train_rows: train_idx.len(),
        test_rows,
    })
}
