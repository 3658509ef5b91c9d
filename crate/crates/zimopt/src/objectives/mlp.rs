//! Fully-connected softmax classifier with hand-written backpropagation.
//!
//! Bias-free by default so the flattened parameter count of a
//! 784 -> 100 -> 10 network is exactly 79,400; biases are available behind a
//! constructor flag. The whole parameter vector is exposed flat, which is
//! what the global multinomial update samples over.

use std::sync::Arc;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::objectives::{dot, Objective};
use crate::rng::RngState;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Tanh,
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Tanh => z.tanh(),
        }
    }

    /// Derivative expressed through the post-activation value.
    fn grad_from_output(self, a: f64) -> f64 {
        match self {
            Activation::Relu => {
                if a > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - a * a,
        }
    }
}

#[derive(Debug, Clone)]
pub struct MlpClassifier {
    layer_sizes: Vec<usize>,
    activation: Activation,
    data: Arc<Dataset>,
    with_bias: bool,
    dim: usize,
    offsets: Vec<usize>, // start of each layer's block in the flat vector
}

impl MlpClassifier {
    pub fn new(
        layer_sizes: Vec<usize>,
        activation: Activation,
        data: Arc<Dataset>,
    ) -> Result<Self> {
        Self::with_bias_flag(layer_sizes, activation, data, false)
    }

    pub fn with_bias_flag(
        layer_sizes: Vec<usize>,
        activation: Activation,
        data: Arc<Dataset>,
        with_bias: bool,
    ) -> Result<Self> {
        if layer_sizes.len() < 2 {
            return Err(Error::InvalidParameter(
                "need at least input and output layers".into(),
            ));
        }
        if layer_sizes.contains(&0) {
            return Err(Error::InvalidParameter("zero-width layer".into()));
        }
        if layer_sizes[0] != data.num_features() {
            return Err(Error::DimensionMismatch {
                expected: data.num_features(),
                got: layer_sizes[0],
            });
        }
        if *layer_sizes.last().unwrap() != data.num_classes() {
            return Err(Error::DimensionMismatch {
                expected: data.num_classes(),
                got: *layer_sizes.last().unwrap(),
            });
        }
        let mut offsets = Vec::with_capacity(layer_sizes.len() - 1);
        let mut dim = 0usize;
        for l in 0..layer_sizes.len() - 1 {
            offsets.push(dim);
            dim += layer_sizes[l + 1] * layer_sizes[l];
            if with_bias {
                dim += layer_sizes[l + 1];
            }
        }
        Ok(Self {
            layer_sizes,
            activation,
            data,
            with_bias,
            dim,
            offsets,
        })
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    fn num_layers(&self) -> usize {
        self.layer_sizes.len() - 1
    }

    fn weights_of<'a>(&self, w: &'a [f64], layer: usize) -> &'a [f64] {
        let (in_dim, out_dim) = (self.layer_sizes[layer], self.layer_sizes[layer + 1]);
        let start = self.offsets[layer];
        &w[start..start + out_dim * in_dim]
    }

    fn biases_of<'a>(&self, w: &'a [f64], layer: usize) -> Option<&'a [f64]> {
        if !self.with_bias {
            return None;
        }
        let (in_dim, out_dim) = (self.layer_sizes[layer], self.layer_sizes[layer + 1]);
        let start = self.offsets[layer] + out_dim * in_dim;
        Some(&w[start..start + out_dim])
    }

    /// Forward pass over a batch of `data` rows; returns per-layer
    /// post-activations (the last entry holds raw logits).
    fn forward(&self, data: &Dataset, w: &[f64], batch: &[usize]) -> Vec<Vec<f64>> {
        let b = batch.len();
        let mut activations: Vec<Vec<f64>> = Vec::with_capacity(self.num_layers());
        for layer in 0..self.num_layers() {
            let (in_dim, out_dim) = (self.layer_sizes[layer], self.layer_sizes[layer + 1]);
            let weights = self.weights_of(w, layer);
            let biases = self.biases_of(w, layer);
            let last = layer + 1 == self.num_layers();
            let mut out = vec![0.0; b * out_dim];
            for row in 0..b {
                let input_row: &[f64] = if layer == 0 {
                    data.feature_row(batch[row])
                } else {
                    &activations[layer - 1][row * in_dim..(row + 1) * in_dim]
                };
                let out_row = &mut out[row * out_dim..(row + 1) * out_dim];
                for o in 0..out_dim {
                    let mut z = dot(&weights[o * in_dim..(o + 1) * in_dim], input_row);
                    if let Some(bias) = biases {
                        z += bias[o];
                    }
                    out_row[o] = if last { z } else { self.activation.apply(z) };
                }
            }
            activations.push(out);
        }
        activations
    }

    /// Mean cross-entropy over the batch and, optionally, its gradient.
    fn loss_and_grad(
        &self,
        w: &[f64],
        batch: &[usize],
        want_grad: bool,
    ) -> (f64, Option<Vec<f64>>) {
        assert_eq!(w.len(), self.dim, "weight dimension mismatch");
        assert!(!batch.is_empty(), "empty batch");
        let b = batch.len();
        let classes = *self.layer_sizes.last().unwrap();
        let mut activations = self.forward(&self.data, w, batch);

        // softmax cross-entropy on the logits; reuse the logits buffer for
        // d(loss)/d(logits)
        let logits = activations.last_mut().unwrap();
        let mut loss = 0.0;
        for row in 0..b {
            let lr = &mut logits[row * classes..(row + 1) * classes];
            let label = self.data.labels()[batch[row]] as usize;
            let max = lr.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut sum_exp = 0.0;
            for v in lr.iter() {
                sum_exp += (v - max).exp();
            }
            loss += max + sum_exp.ln() - lr[label];
            if want_grad {
                for (c, v) in lr.iter_mut().enumerate() {
                    let softmax = (*v - max).exp() / sum_exp;
                    *v = (softmax - if c == label { 1.0 } else { 0.0 }) / b as f64;
                }
            }
        }
        loss /= b as f64;
        if !want_grad {
            return (loss, None);
        }

        let mut grad = vec![0.0; self.dim];
        // walk layers backwards; `delta` holds d(loss)/d(z_layer)
        let mut delta = activations.pop().unwrap();
        for layer in (0..self.num_layers()).rev() {
            let (in_dim, out_dim) = (self.layer_sizes[layer], self.layer_sizes[layer + 1]);
            let weights = self.weights_of(w, layer);
            let gw_start = self.offsets[layer];

            let mut delta_prev = if layer > 0 {
                vec![0.0; b * in_dim]
            } else {
                Vec::new()
            };
            for row in 0..b {
                let input_row: &[f64] = if layer == 0 {
                    self.data.feature_row(batch[row])
                } else {
                    &activations[layer - 1][row * in_dim..(row + 1) * in_dim]
                };
                let delta_row = &delta[row * out_dim..(row + 1) * out_dim];
                for o in 0..out_dim {
                    let s = delta_row[o];
                    if s == 0.0 {
                        continue;
                    }
                    let gw = &mut grad[gw_start + o * in_dim..gw_start + (o + 1) * in_dim];
                    for (g, &x) in gw.iter_mut().zip(input_row) {
                        *g += s * x;
                    }
                }
                if self.with_bias {
                    let gb_start = gw_start + out_dim * in_dim;
                    for o in 0..out_dim {
                        grad[gb_start + o] += delta_row[o];
                    }
                }
                if layer > 0 {
                    let dp = &mut delta_prev[row * in_dim..(row + 1) * in_dim];
                    for o in 0..out_dim {
                        let s = delta_row[o];
                        if s == 0.0 {
                            continue;
                        }
                        let wr = &weights[o * in_dim..(o + 1) * in_dim];
                        for (d, &wv) in dp.iter_mut().zip(wr) {
                            *d += s * wv;
                        }
                    }
                    // through the activation
                    let prev_act = &activations[layer - 1][row * in_dim..(row + 1) * in_dim];
                    for (d, &a) in dp.iter_mut().zip(prev_act) {
                        *d *= self.activation.grad_from_output(a);
                    }
                }
            }
            delta = delta_prev;
        }
        (loss, Some(grad))
    }

    /// Classification accuracy of `w` on an arbitrary dataset with the same
    /// feature and class layout (e.g. the held-out test split).
    pub fn eval_accuracy(&self, w: &[f64], data: &Dataset) -> Result<f64> {
        if data.num_features() != self.layer_sizes[0] {
            return Err(Error::DimensionMismatch {
                expected: self.layer_sizes[0],
                got: data.num_features(),
            });
        }
        if data.num_classes() != *self.layer_sizes.last().unwrap() {
            return Err(Error::DimensionMismatch {
                expected: *self.layer_sizes.last().unwrap(),
                got: data.num_classes(),
            });
        }
        let batch: Vec<usize> = (0..data.len()).collect();
        let activations = self.forward(data, w, &batch);
        let classes = data.num_classes();
        let logits = activations.last().unwrap();
        let mut correct = 0usize;
        for (row, &idx) in batch.iter().enumerate() {
            let lr = &logits[row * classes..(row + 1) * classes];
            let argmax = lr
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.partial_cmp(b.1).expect("finite logits"))
                .map(|(i, _)| i)
                .unwrap();
            if argmax == data.labels()[idx] as usize {
                correct += 1;
            }
        }
        Ok(correct as f64 / data.len() as f64)
    }
}

impl Objective for MlpClassifier {
    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, w: &[f64]) -> f64 {
        let all: Vec<usize> = (0..self.data.len()).collect();
        self.loss_and_grad(w, &all, false).0
    }

    fn gradient_raw(&self, w: &[f64]) -> Vec<f64> {
        let all: Vec<usize> = (0..self.data.len()).collect();
        self.loss_and_grad(w, &all, true).1.unwrap()
    }

    fn num_samples(&self) -> Option<usize> {
        Some(self.data.len())
    }

    fn batch_value(&self, w: &[f64], batch: &[usize]) -> f64 {
        self.loss_and_grad(w, batch, false).0
    }

    fn batch_gradient_raw(&self, w: &[f64], batch: &[usize]) -> Vec<f64> {
        self.loss_and_grad(w, batch, true).1.unwrap()
    }

    fn accuracy(&self, w: &[f64]) -> Option<f64> {
        self.eval_accuracy(w, &self.data).ok()
    }

    fn eval_accuracy_on(&self, w: &[f64], data: &Dataset) -> Option<f64> {
        self.eval_accuracy(w, data).ok()
    }

    /// Uniform Xavier/Glorot init: `U(-sqrt(6/(fan_in+fan_out)), +...)` per
    /// layer, biases zero.
    fn default_init(&self, rng: &mut RngState) -> Vec<f64> {
        let mut w = vec![0.0; self.dim];
        for layer in 0..self.num_layers() {
            let (in_dim, out_dim) = (self.layer_sizes[layer], self.layer_sizes[layer + 1]);
            let limit = (6.0 / (in_dim + out_dim) as f64).sqrt();
            let start = self.offsets[layer];
            for v in w[start..start + out_dim * in_dim].iter_mut() {
                *v = rng.uniform(-limit, limit);
            }
        }
        w
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::{finite_diff_gradcheck, finite_diff_gradcheck_coords};
    use crate::data::synthetic_gaussian_blobs;

    fn small_blobs(dim: usize, classes: usize, per_class: usize) -> Arc<Dataset> {
        Arc::new(synthetic_gaussian_blobs(classes, per_class, dim, 3.0, 31).unwrap())
    }

    #[test]
    fn parameter_count_of_reference_network() {
        let data = small_blobs(784, 10, 1);
        let mlp = MlpClassifier::new(vec![784, 100, 10], Activation::Relu, data).unwrap();
        assert_eq!(mlp.dim(), 79_400);
    }

    #[test]
    fn zero_weights_give_uniform_softmax_loss() {
        let data = small_blobs(12, 10, 2);
        let mlp = MlpClassifier::new(vec![12, 6, 10], Activation::Relu, data).unwrap();
        let w = vec![0.0; mlp.dim()];
        assert!((mlp.value(&w) - 10f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn layer_shape_validation() {
        let data = small_blobs(8, 3, 2);
        assert!(MlpClassifier::new(vec![8], Activation::Relu, data.clone()).is_err());
        assert!(MlpClassifier::new(vec![7, 4, 3], Activation::Relu, data.clone()).is_err());
        assert!(MlpClassifier::new(vec![8, 4, 2], Activation::Relu, data.clone()).is_err());
        assert!(MlpClassifier::new(vec![8, 4, 3], Activation::Relu, data).is_ok());
    }

    #[test]
    fn gradcheck_tanh_full_sweep() {
        let data = small_blobs(9, 4, 4);
        let mlp = MlpClassifier::new(vec![9, 6, 4], Activation::Tanh, data).unwrap();
        let mut rng = RngState::new(1);
        let w = mlp.default_init(&mut rng);
        let err = finite_diff_gradcheck(&mlp, &w, 1e-4);
        assert!(err <= 1e-4, "gradcheck error {err}");
    }

    #[test]
    fn gradcheck_relu_on_sampled_coordinates() {
        let data = small_blobs(16, 3, 6);
        let mlp = MlpClassifier::new(vec![16, 8, 3], Activation::Relu, data).unwrap();
        let mut rng = RngState::new(2);
        let w = mlp.default_init(&mut rng);
        let coords: Vec<usize> = (0..mlp.dim()).step_by(3).collect();
        let err = finite_diff_gradcheck_coords(&mlp, &w, 1e-5, &coords);
        assert!(err <= 1e-4, "gradcheck error {err}");
    }

    #[test]
    fn gradcheck_with_biases() {
        let data = small_blobs(6, 3, 3);
        let mlp =
            MlpClassifier::with_bias_flag(vec![6, 5, 3], Activation::Tanh, data, true).unwrap();
        assert_eq!(mlp.dim(), 6 * 5 + 5 + 5 * 3 + 3);
        let mut rng = RngState::new(3);
        let w = mlp.default_init(&mut rng);
        let err = finite_diff_gradcheck(&mlp, &w, 1e-4);
        assert!(err <= 1e-4, "gradcheck error {err}");
    }

    #[test]
    fn minibatch_gradients_average_to_full_gradient() {
        let data = small_blobs(10, 2, 8); // m = 16
        let mlp = MlpClassifier::new(vec![10, 4, 2], Activation::Tanh, data).unwrap();
        let mut rng = RngState::new(4);
        let w = mlp.default_init(&mut rng);
        let m = mlp.num_samples().unwrap();
        let batch = 4;
        let mut mean = vec![0.0; mlp.dim()];
        for b in 0..m / batch {
            let idx: Vec<usize> = (b * batch..(b + 1) * batch).collect();
            for (acc, g) in mean.iter_mut().zip(mlp.batch_gradient_raw(&w, &idx)) {
                *acc += g * batch as f64 / m as f64;
            }
        }
        let full = mlp.gradient_raw(&w);
        for (a, b) in mean.iter().zip(&full) {
            assert!((a - b).abs() <= 1e-10, "{a} vs {b}");
        }
    }

    #[test]
    fn forward_backward_deterministic() {
        let data = small_blobs(8, 3, 5);
        let mlp = MlpClassifier::new(vec![8, 6, 3], Activation::Relu, data).unwrap();
        let mut rng = RngState::new(5);
        let w = mlp.default_init(&mut rng);
        let batch: Vec<usize> = vec![0, 3, 7, 11];
        let (l1, g1) = mlp.loss_and_grad(&w, &batch, true);
        let (l2, g2) = mlp.loss_and_grad(&w, &batch, true);
        assert_eq!(l1, l2);
        assert_eq!(g1, g2);
    }

    #[test]
    fn accuracy_on_separable_blobs_after_short_training() {
        let data = small_blobs(4, 3, 20);
        let mlp = MlpClassifier::new(vec![4, 8, 3], Activation::Tanh, data.clone()).unwrap();
        let mut rng = RngState::new(6);
        let mut w = mlp.default_init(&mut rng);
        for _ in 0..400 {
            let g = mlp.gradient_raw(&w);
            for (wi, gi) in w.iter_mut().zip(g) {
                *wi -= 0.5 * gi;
            }
        }
        let acc = mlp.accuracy(&w).unwrap();
        assert!(acc >= 0.95, "train accuracy {acc}");
        let held_out = synthetic_gaussian_blobs(3, 20, 4, 3.0, 77).unwrap();
        let test_acc = mlp.eval_accuracy(&w, &held_out).unwrap();
        assert!(test_acc >= 0.9, "test accuracy {test_acc}");
    }
}
