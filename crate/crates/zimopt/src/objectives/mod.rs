//! Objective oracles with analytic gradients and, where available, exact
//! theory constants.

mod logistic;
mod mlp;
mod quadratic;
mod rosenbrock;

pub use logistic::LogisticRegression;
pub use mlp::{Activation, MlpClassifier};
pub use quadratic::Quadratic;
pub use rosenbrock::Rosenbrock;

use crate::error::Result;
use crate::rng::RngState;
use crate::types::{GradientVector, TheoryConstants};

/// A differentiable objective `F : R^d -> R`.
///
/// Oracles are immutable after construction and safe for concurrent
/// read-only evaluation. Data-driven objectives additionally expose
/// minibatch value/gradient over an index set; `value`/`gradient` are then
/// the full-batch quantities.
pub trait Objective: Send + Sync {
    fn dim(&self) -> usize;

    fn value(&self, w: &[f64]) -> f64;

    fn gradient_raw(&self, w: &[f64]) -> Vec<f64>;

    /// Full gradient as a validated [`GradientVector`]; errors on non-finite
    /// entries.
    fn gradient(&self, w: &[f64]) -> Result<GradientVector> {
        GradientVector::new(self.gradient_raw(w))
    }

    /// Number of data points, for stochastic objectives.
    fn num_samples(&self) -> Option<usize> {
        None
    }

    fn batch_value(&self, w: &[f64], batch: &[usize]) -> f64 {
        let _ = batch;
        self.value(w)
    }

    fn batch_gradient_raw(&self, w: &[f64], batch: &[usize]) -> Vec<f64> {
        let _ = batch;
        self.gradient_raw(w)
    }

    /// Known constants (`L`, `F_inf`, ...) when the objective has them.
    fn constants(&self) -> Option<&TheoryConstants> {
        None
    }

    /// Training-set classification accuracy, for classifier objectives.
    fn accuracy(&self, w: &[f64]) -> Option<f64> {
        let _ = w;
        None
    }

    /// Classification accuracy on an arbitrary dataset with matching layout
    /// (e.g. a held-out test split), for classifier objectives.
    fn eval_accuracy_on(&self, w: &[f64], data: &crate::data::Dataset) -> Option<f64> {
        let _ = (w, data);
        None
    }

    /// Hessian-vector product for objectives whose Hessian is constant
    /// (quadratics). `None` otherwise.
    fn hessian_apply(&self, v: &[f64]) -> Option<Vec<f64>> {
        let _ = v;
        None
    }

    /// Default initial weights. Zeros unless the objective overrides it.
    fn default_init(&self, rng: &mut RngState) -> Vec<f64> {
        let _ = rng;
        vec![0.0; self.dim()]
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
