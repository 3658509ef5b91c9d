//! Integer-lattice stochastic optimization built around a zero-inflated
//! multinomial (ZIM) update rule.
//!
//! Instead of discretizing a real-valued gradient step, the optimizer here
//! samples an integer-valued update directly: multinomial counts whose
//! category probabilities follow the smoothed absolute gradient, signed by
//! the gradient, with a "no-op" slot whose probability `1 - r` plays the
//! role of a learning rate. Weights live on an integer lattice anchored at
//! the initial point, so the update arithmetic is exact.
//!
//! The crate is organized as:
//!
//! - [`types`]: validated value types shared everywhere (gradients,
//!   probability vectors, integer updates, lattice weights, theory
//!   constants).
//! - [`rng`]: the deterministic, platform-independent random source.
//! - [`sampler`]: ZIM probability construction, sampling, and closed-form
//!   moments.
//! - [`optimizer`]: training loops for the ZIM update and an SGD baseline.
//! - [`analysis`]: evaluators for the convergence bound, the update-bound
//!   inequalities, descent-lemma checks, gradient checking, and Lipschitz
//!   estimation.
//! - [`objectives`]: test objectives with analytic gradients (quadratics,
//!   logistic regression, Rosenbrock, a small MLP classifier).
//! - [`data`]: IDX-format MNIST ingestion, synthetic datasets, stratified
//!   subsetting.
//! - [`verify`]: the distribution- and inequality-level verification suite
//!   used by the CLI and the acceptance tests.

pub mod analysis;
pub mod data;
pub mod error;
pub mod objectives;
pub mod optimizer;
pub mod rng;
pub mod sampler;
pub mod types;
pub mod verify;

pub use error::{Error, Result};
pub use rng::RngState;
pub use types::{
    validate_config, ConfigVerdict, GradientVector, LatticeWeights, ProbabilityVector, StepRecord,
    TheoryConstants, UpdateVector, ZimConfig,
};
