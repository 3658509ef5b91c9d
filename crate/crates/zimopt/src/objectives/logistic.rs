//! L2-regularized logistic regression over a binary dataset.
//!
//! `F(w) = (1/m) sum_i [softplus(x_i . w) - y_i (x_i . w)] + (lambda/2)||w||^2`
//! with labels in {0, 1}. Every per-sample term is nonnegative, so 0 is a
//! lower bound. The gradient Lipschitz constant is bounded by
//! `lambda_max(X^T X) / (4 m) + lambda`.

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::objectives::{dot, Objective};
use crate::rng::RngState;
use crate::types::TheoryConstants;

const POWER_SEED: u64 = 0x1091_57c1;

#[derive(Debug, Clone)]
pub struct LogisticRegression {
    x: Vec<f64>, // m x dim, row-major
    y: Vec<u8>,
    m: usize,
    dim: usize,
    lambda: f64,
    constants: TheoryConstants,
}

impl LogisticRegression {
    pub fn new(rows: Vec<Vec<f64>>, y: Vec<u8>, lambda: f64) -> Result<Self> {
        let m = rows.len();
        if m == 0 {
            return Err(Error::InvalidParameter("empty dataset".into()));
        }
        if y.len() != m {
            return Err(Error::DimensionMismatch {
                expected: m,
                got: y.len(),
            });
        }
        if let Some(bad) = y.iter().find(|&&v| v > 1) {
            return Err(Error::InvalidParameter(format!(
                "labels must be 0 or 1, got {bad}"
            )));
        }
        if !lambda.is_finite() || lambda < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "regularization must be nonnegative, got {lambda}"
            )));
        }
        let dim = rows[0].len();
        if dim == 0 {
            return Err(Error::InvalidParameter("empty feature rows".into()));
        }
        let mut x = Vec::with_capacity(m * dim);
        for row in &rows {
            if row.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: row.len(),
                });
            }
            x.extend_from_slice(row);
        }

        let gram_eig = gram_dominant_eigenvalue(&x, m, dim)?;
        let l = gram_eig / (4.0 * m as f64) + lambda;
        let constants = TheoryConstants::smoothness(l)?.with_f_inf(0.0);
        Ok(Self {
            x,
            y,
            m,
            dim,
            lambda,
            constants,
        })
    }

    /// Treat a two-class [`Dataset`] as a logistic-regression problem.
    pub fn from_dataset(data: &Dataset, lambda: f64) -> Result<Self> {
        if data.num_classes() != 2 {
            return Err(Error::InvalidParameter(format!(
                "logistic regression needs 2 classes, dataset has {}",
                data.num_classes()
            )));
        }
        let rows = (0..data.len())
            .map(|i| data.feature_row(i).to_vec())
            .collect();
        Self::new(rows, data.labels().to_vec(), lambda)
    }

    pub fn lipschitz(&self) -> f64 {
        self.constants.l
    }

    fn row(&self, i: usize) -> &[f64] {
        &self.x[i * self.dim..(i + 1) * self.dim]
    }

    fn accumulate(&self, w: &[f64], batch: &[usize]) -> (f64, Vec<f64>) {
        let mut loss = 0.0;
        let mut grad = vec![0.0; self.dim];
        for &i in batch {
            let xi = self.row(i);
            let z = dot(xi, w);
            let yi = self.y[i] as f64;
            loss += softplus(z) - yi * z;
            let residual = sigmoid(z) - yi;
            for (g, &xj) in grad.iter_mut().zip(xi) {
                *g += residual * xj;
            }
        }
        let inv = 1.0 / batch.len() as f64;
        loss *= inv;
        for (g, &wi) in grad.iter_mut().zip(w) {
            *g = *g * inv + self.lambda * wi;
        }
        loss += 0.5 * self.lambda * dot(w, w);
        (loss, grad)
    }
}

impl Objective for LogisticRegression {
    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, w: &[f64]) -> f64 {
        let all: Vec<usize> = (0..self.m).collect();
        self.accumulate(w, &all).0
    }

    fn gradient_raw(&self, w: &[f64]) -> Vec<f64> {
        let all: Vec<usize> = (0..self.m).collect();
        self.accumulate(w, &all).1
    }

    fn num_samples(&self) -> Option<usize> {
        Some(self.m)
    }

    fn batch_value(&self, w: &[f64], batch: &[usize]) -> f64 {
        self.accumulate(w, batch).0
    }

    fn batch_gradient_raw(&self, w: &[f64], batch: &[usize]) -> Vec<f64> {
        self.accumulate(w, batch).1
    }

    fn constants(&self) -> Option<&TheoryConstants> {
        Some(&self.constants)
    }

    fn accuracy(&self, w: &[f64]) -> Option<f64> {
        let correct = (0..self.m)
            .filter(|&i| {
                let predicted = dot(self.row(i), w) >= 0.0;
                predicted == (self.y[i] == 1)
            })
            .count();
        Some(correct as f64 / self.m as f64)
    }

    fn eval_accuracy_on(&self, w: &[f64], data: &Dataset) -> Option<f64> {
        if data.num_features() != self.dim || data.num_classes() != 2 {
            return None;
        }
        let correct = (0..data.len())
            .filter(|&i| {
                let predicted = dot(data.feature_row(i), w) >= 0.0;
                predicted == (data.labels()[i] == 1)
            })
            .count();
        Some(correct as f64 / data.len() as f64)
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^z)` without overflow.
fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

fn gram_dominant_eigenvalue(x: &[f64], m: usize, dim: usize) -> Result<f64> {
    let apply = |v: &[f64]| {
        // X^T (X v)
        let mut xv = vec![0.0; m];
        for i in 0..m {
            xv[i] = dot(&x[i * dim..(i + 1) * dim], v);
        }
        let mut out = vec![0.0; dim];
        for i in 0..m {
            let xi = &x[i * dim..(i + 1) * dim];
            for (o, &xj) in out.iter_mut().zip(xi) {
                *o += xv[i] * xj;
            }
        }
        out
    };
    let mut rng = RngState::new(POWER_SEED);
    crate::analysis::power_iteration(apply, dim, 1e-12, 10_000, &mut rng)
}
