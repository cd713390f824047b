//! Dense feed-forward network: affine layers, rectified-linear hidden
//! activations, softmax output, mean cross-entropy loss.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One affine layer; `weights` is `outputs × inputs`, row-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Dense {
    fn row(&self, o: usize) -> &[f64] {
        &self.weights[o * self.inputs..(o + 1) * self.inputs]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Mlp {
    layers: Vec<Dense>,
}

/// Dot product with four independent accumulators so the loop vectorizes.
#[inline]
pub(crate) fn fast_dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0f64; 4];
    let ca = a.chunks_exact(4);
    let cb = b.chunks_exact(4);
    let tail: f64 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| x * y).sum();
    for (x, y) in ca.zip(cb) {
        acc[0] += x[0] * y[0];
        acc[1] += x[1] * y[1];
        acc[2] += x[2] * y[2];
        acc[3] += x[3] * y[3];
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

#[inline]
fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// In-place softmax; returns `log Σ exp(z)` for the loss.
fn softmax_in_place(z: &mut [f64]) -> f64 {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in z.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in z.iter_mut() {
        *v /= sum;
    }
    max + sum.ln()
}

/// Activations of a batch, kept for the backward pass.
pub(crate) struct Trace {
    /// `acts[0]` is the input batch; `acts[l+1]` the output of layer `l`
    /// (post-ReLU for hidden layers, probabilities for the last).
    acts: Vec<Vec<f64>>,
    batch: usize,
}

/// Parameter gradients, one entry per layer.
#[derive(Clone, Debug)]
pub(crate) struct Gradients {
    pub weights: Vec<Vec<f64>>,
    pub bias: Vec<Vec<f64>>,
}

impl Gradients {
    pub fn zeros_like(mlp: &Mlp) -> Self {
        Self {
            weights: mlp.layers.iter().map(|l| vec![0.0; l.weights.len()]).collect(),
            bias: mlp.layers.iter().map(|l| vec![0.0; l.bias.len()]).collect(),
        }
    }

    fn clear(&mut self) {
        self.weights.iter_mut().chain(self.bias.iter_mut()).for_each(|g| g.fill(0.0));
    }
}

impl Mlp {
    /// Uniform initialization in ±sqrt(6/(fan_in + fan_out)), zero biases.
    pub fn new(layer_dims: &[usize], seed: u64) -> Result<Self> {
        if layer_dims.len() < 2 || layer_dims.contains(&0) {
            return Err(Error::InvalidArgument(format!("invalid layer dimensions {layer_dims:?}")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layers = layer_dims
            .windows(2)
            .map(|w| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
                Dense {
                    inputs: fan_in,
                    outputs: fan_out,
                    weights: (0..fan_in * fan_out).map(|_| rng.gen_range(-limit..limit)).collect(),
                    bias: vec![0.0; fan_out],
                }
            })
            .collect();
        Ok(Self { layers })
    }

    pub fn from_layers(layers: Vec<Dense>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::InvalidArgument("network needs at least one layer".into()));
        }
        for (i, l) in layers.iter().enumerate() {
            if l.weights.len() != l.inputs * l.outputs || l.bias.len() != l.outputs || l.inputs == 0 || l.outputs == 0 {
                return Err(Error::InvalidArgument(format!("layer {i} has inconsistent shapes")));
            }
            if l.weights.iter().chain(&l.bias).any(|v| !v.is_finite()) {
                return Err(Error::NonFinite("network parameters"));
            }
        }
        for (i, pair) in layers.windows(2).enumerate() {
            if pair[0].outputs != pair[1].inputs {
                return Err(Error::InvalidArgument(format!(
                    "layer {i} outputs {} but layer {} expects {}",
                    pair[0].outputs,
                    i + 1,
                    pair[1].inputs
                )));
            }
        }
        Ok(Self { layers })
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    pub(crate) fn layers_mut(&mut self) -> &mut [Dense] {
        &mut self.layers
    }

    pub fn layer_dims(&self) -> Vec<usize> {
        let mut dims = vec![self.layers[0].inputs];
        dims.extend(self.layers.iter().map(|l| l.outputs));
        dims
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].inputs
    }

    pub fn classes(&self) -> usize {
        self.layers.last().expect("non-empty").outputs
    }

    pub fn parameter_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    /// Class probabilities for one feature vector.
    pub fn forward(&self, features: &[f64]) -> Result<Vec<f64>> {
        if features.len() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                context: "Mlp::forward",
                expected: self.input_dim(),
                actual: features.len(),
            });
        }
        let trace = self.forward_batch(features, 1);
        let probs = trace.acts.into_iter().last().expect("output layer");
        if probs.iter().any(|p| !p.is_finite()) {
            return Err(Error::NonFinite("Mlp::forward"));
        }
        Ok(probs)
    }

    /// Pre-softmax scores for one feature vector.
    pub fn scores(&self, features: &[f64]) -> Result<Vec<f64>> {
        if features.len() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                context: "Mlp::scores",
                expected: self.input_dim(),
                actual: features.len(),
            });
        }
        let mut x = features.to_vec();
        for (li, layer) in self.layers.iter().enumerate() {
            let mut z = layer.bias.clone();
            for (o, zo) in z.iter_mut().enumerate() {
                *zo += fast_dot(layer.row(o), &x);
            }
            if li + 1 < self.layers.len() {
                z.iter_mut().for_each(|v| *v = v.max(0.0));
            }
            x = z;
        }
        Ok(x)
    }

    /// Forward pass over `batch` rows stored contiguously in `inputs`.
    pub(crate) fn forward_batch(&self, inputs: &[f64], batch: usize) -> Trace {
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        acts.push(inputs.to_vec());
        let last = self.layers.len() - 1;
        for (li, layer) in self.layers.iter().enumerate() {
            let x = &acts[li];
            let mut z = vec![0.0; batch * layer.outputs];
            // weight row outer so it stays hot across the batch
            for o in 0..layer.outputs {
                let w = layer.row(o);
                let b = layer.bias[o];
                for s in 0..batch {
                    z[s * layer.outputs + o] = b + fast_dot(w, &x[s * layer.inputs..(s + 1) * layer.inputs]);
                }
            }
            if li < last {
                z.iter_mut().for_each(|v| *v = v.max(0.0));
            } else {
                for row in z.chunks_exact_mut(layer.outputs) {
                    softmax_in_place(row);
                }
            }
            acts.push(z);
        }
        Trace { acts, batch }
    }

    /// Mean cross-entropy of a traced batch.
    pub(crate) fn batch_loss(trace: &Trace, labels: &[usize]) -> f64 {
        let probs = trace.acts.last().expect("output");
        let classes = probs.len() / trace.batch;
        labels
            .iter()
            .enumerate()
            .map(|(s, &y)| {
                let p = probs[s * classes + y];
                if p.is_nan() {
                    f64::NAN
                } else {
                    -(p.max(f64::MIN_POSITIVE)).ln()
                }
            })
            .sum::<f64>()
            / trace.batch as f64
    }

    /// Gradient of the mean cross-entropy, written into `grads`.
    pub(crate) fn backward(&self, trace: &Trace, labels: &[usize], grads: &mut Gradients) {
        grads.clear();
        let batch = trace.batch;
        let inv = 1.0 / batch as f64;
        let classes = self.classes();
        // dL/dz at the output: (p − onehot) / batch
        let mut delta: Vec<f64> = trace.acts.last().expect("output").clone();
        for (s, &y) in labels.iter().enumerate() {
            delta[s * classes + y] -= 1.0;
        }
        delta.iter_mut().for_each(|v| *v *= inv);

        for li in (0..self.layers.len()).rev() {
            let layer = &self.layers[li];
            let x = &trace.acts[li];
            let gw = &mut grads.weights[li];
            let gb = &mut grads.bias[li];
            let mut dx = if li > 0 { vec![0.0; batch * layer.inputs] } else { Vec::new() };
            for o in 0..layer.outputs {
                let w = layer.row(o);
                let gw_row = &mut gw[o * layer.inputs..(o + 1) * layer.inputs];
                for s in 0..batch {
                    let d = delta[s * layer.outputs + o];
                    if d == 0.0 {
                        continue;
                    }
                    gb[o] += d;
                    axpy(d, &x[s * layer.inputs..(s + 1) * layer.inputs], gw_row);
                    if li > 0 {
                        axpy(d, w, &mut dx[s * layer.inputs..(s + 1) * layer.inputs]);
                    }
                }
            }
            if li > 0 {
                // ReLU mask from the stored post-activation values
                for (g, &a) in dx.iter_mut().zip(x) {
                    if a <= 0.0 {
                        *g = 0.0;
                    }
                }
                delta = dx;
            }
        }
    }

    /// Cross-entropy of a single labelled sample.
    pub fn loss(&self, features: &[f64], label: usize) -> Result<f64> {
        if label >= self.classes() {
            return Err(Error::InvalidArgument(format!("label {label} out of range")));
        }
        let p = self.forward(features)?;
        Ok(-(p[label].max(f64::MIN_POSITIVE)).ln())
    }
}

fn param(net: &mut Mlp, layer: usize, which: usize, idx: usize) -> &mut f64 {
    let l = &mut net.layers[layer];
    if which == 0 {
        &mut l.weights[idx]
    } else {
        &mut l.bias[idx]
    }
}

/// Largest relative discrepancy between backpropagated and central
/// finite-difference gradients (step 1e−5) over every parameter.
///
/// The relative error uses `max(|analytic|, |numeric|, 1e−6)` as the
/// denominator so vanishing gradients do not blow it up.
pub fn gradient_check(mlp: &Mlp, features: &[f64], label: usize) -> Result<f64> {
    const STEP: f64 = 1e-5;
    mlp.loss(features, label)?;
    let trace = mlp.forward_batch(features, 1);
    let mut grads = Gradients::zeros_like(mlp);
    mlp.backward(&trace, &[label], &mut grads);

    let mut probe = mlp.clone();
    let mut worst = 0.0f64;
    for li in 0..mlp.layers.len() {
        for which in 0..2 {
            let count = if which == 0 {
                mlp.layers[li].weights.len()
            } else {
                mlp.layers[li].bias.len()
            };
            for idx in 0..count {
                let analytic = if which == 0 { grads.weights[li][idx] } else { grads.bias[li][idx] };
                let orig = *param(&mut probe, li, which, idx);
                *param(&mut probe, li, which, idx) = orig + STEP;
                let up = probe.loss(features, label)?;
                *param(&mut probe, li, which, idx) = orig - STEP;
                let down = probe.loss(features, label)?;
                *param(&mut probe, li, which, idx) = orig;
                let numeric = (up - down) / (2.0 * STEP);
                let denom = analytic.abs().max(numeric.abs()).max(1e-6);
                worst = worst.max((analytic - numeric).abs() / denom);
            }
        }
    }
    Ok(worst)
}
