//! Validated value types shared by the sampler, optimizer, and analysis
//! modules.
//!
//! Dimensions are carried explicitly and cross-checked at module boundaries;
//! a mismatch is a hard error, never a broadcast. Real scalars are `f64`,
//! integer counts are `i64`/`u64`, which leaves headroom for trial counts up
//! to 2^31 in second-moment accumulations.

use serde::Serialize;

use crate::error::{Error, Result};

/// Tolerance on the sum of a probability vector.
pub const PROBABILITY_SUM_TOLERANCE: f64 = 1e-12;

/// Real-valued gradient (or minibatch gradient estimate) of the objective at
/// the current weights. Entries are guaranteed finite and the dimension is
/// at least 1.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientVector {
    values: Vec<f64>,
}

impl GradientVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidParameter(
                "gradient dimension must be at least 1".into(),
            ));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("gradient entry {i}")));
        }
        Ok(Self { values })
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn l1_norm(&self) -> f64 {
        self.values.iter().map(|v| v.abs()).sum()
    }

    /// Squared Euclidean norm.
    pub fn sq_norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum()
    }
}

/// Hyperparameters of the zero-inflated multinomial update: trial count `n`,
/// zero-inflation probability `r` (which doubles as the learning rate of the
/// fixed-rate convergence analysis), smoothing constant `c`, and the lattice
/// step `delta` in weight units per lattice unit.
///
/// Theory checks always run with `delta = 1`; the step is exposed because
/// neural-network training is infeasible with unit steps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ZimConfig {
    pub n: u64,
    pub r: f64,
    pub c: f64,
    pub delta: f64,
}

impl ZimConfig {
    pub fn new(n: u64, r: f64, c: f64, delta: f64) -> Result<Self> {
        if n < 1 {
            return Err(Error::InvalidParameter("trial count n must be >= 1".into()));
        }
        if !(0.0..=1.0).contains(&r) {
            return Err(Error::InvalidParameter(format!(
                "zero-inflation probability r must be in [0, 1], got {r}"
            )));
        }
        if !c.is_finite() || c <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "smoothing constant c must be positive and finite, got {c}"
            )));
        }
        if !delta.is_finite() || delta <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "lattice step delta must be positive and finite, got {delta}"
            )));
        }
        Ok(Self { n, r, c, delta })
    }
}

/// A discrete probability distribution: entries in [0, 1] summing to 1
/// within [`PROBABILITY_SUM_TOLERANCE`]. Holds either the category
/// distribution `q` (length d) or its zero-inflation augmentation (length
/// d + 1, no-op slot first).
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityVector {
    probs: Vec<f64>,
}

impl ProbabilityVector {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::InvalidParameter(
                "probability vector must be non-empty".into(),
            ));
        }
        for (i, &p) in probs.iter().enumerate() {
            if !p.is_finite() {
                return Err(Error::NonFinite(format!("probability entry {i}")));
            }
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::InvalidParameter(format!(
                    "probability entry {i} = {p} outside [0, 1]"
                )));
            }
        }
        let sum = neumaier_sum(&probs);
        if (sum - 1.0).abs() > PROBABILITY_SUM_TOLERANCE {
            return Err(Error::InvalidParameter(format!(
                "probabilities sum to {sum}, more than {PROBABILITY_SUM_TOLERANCE} from 1"
            )));
        }
        Ok(Self { probs })
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.probs
    }
}

/// Compensated summation; keeps the validation error of the sum itself far
/// below the tolerance it enforces.
pub(crate) fn neumaier_sum(xs: &[f64]) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for &x in xs {
        let t = sum + x;
        if sum.abs() >= x.abs() {
            comp += (sum - t) + x;
        } else {
            comp += (x - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Integer-valued update in lattice units. The multinomial allocates at most
/// `n` counts across coordinates, so `||steps||_1 <= n` and each entry lies
/// in [-n, n].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UpdateVector {
    steps: Vec<i64>,
}

impl UpdateVector {
    pub fn new(steps: Vec<i64>, n: u64) -> Result<Self> {
        if steps.is_empty() {
            return Err(Error::InvalidParameter(
                "update dimension must be at least 1".into(),
            ));
        }
        let mut total: u64 = 0;
        for (i, &s) in steps.iter().enumerate() {
            let mag = s.unsigned_abs();
            if mag > n {
                return Err(Error::InvalidParameter(format!(
                    "update entry {i} = {s} outside [-{n}, {n}]"
                )));
            }
            total += mag;
        }
        if total > n {
            return Err(Error::InvalidParameter(format!(
                "update l1 norm {total} exceeds trial count {n}"
            )));
        }
        Ok(Self { steps })
    }

    pub fn dim(&self) -> usize {
        self.steps.len()
    }

    pub fn as_slice(&self) -> &[i64] {
        &self.steps
    }

    pub fn l1_norm(&self) -> u64 {
        self.steps.iter().map(|s| s.unsigned_abs()).sum()
    }

    pub fn is_zero(&self) -> bool {
        self.steps.iter().all(|&s| s == 0)
    }
}

/// Weights as integer offsets from a real anchor: `w = anchor - delta * z`.
///
/// The integer coordinates carry the exact optimizer state; realized weights
/// are recomputed from the anchor on demand, so there is no accumulated
/// floating-point drift across steps.
#[derive(Debug, Clone, PartialEq)]
pub struct LatticeWeights {
    anchor: Vec<f64>,
    coords: Vec<i64>,
    delta: f64,
}

impl LatticeWeights {
    pub fn new(anchor: Vec<f64>, delta: f64) -> Result<Self> {
        if anchor.is_empty() {
            return Err(Error::InvalidParameter(
                "weight dimension must be at least 1".into(),
            ));
        }
        if let Some(i) = anchor.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("anchor entry {i}")));
        }
        if !delta.is_finite() || delta <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "lattice step delta must be positive and finite, got {delta}"
            )));
        }
        let coords = vec![0; anchor.len()];
        Ok(Self {
            anchor,
            coords,
            delta,
        })
    }

    pub fn dim(&self) -> usize {
        self.anchor.len()
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn coords(&self) -> &[i64] {
        &self.coords
    }

    pub fn anchor(&self) -> &[f64] {
        &self.anchor
    }

    /// Realized weights `anchor - delta * z`.
    pub fn current(&self) -> Vec<f64> {
        self.anchor
            .iter()
            .zip(&self.coords)
            .map(|(&a, &z)| a - self.delta * z as f64)
            .collect()
    }

    /// Apply an update: `w <- w - delta * steps`, i.e. `z <- z + steps`.
    pub fn apply(&mut self, update: &UpdateVector) -> Result<()> {
        if update.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: update.dim(),
            });
        }
        for (z, &s) in self.coords.iter_mut().zip(update.as_slice()) {
            *z += s;
        }
        Ok(())
    }

    /// Undo an update exactly (integer arithmetic, no drift).
    pub fn revert(&mut self, update: &UpdateVector) -> Result<()> {
        if update.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: update.dim(),
            });
        }
        for (z, &s) in self.coords.iter_mut().zip(update.as_slice()) {
            *z -= s;
        }
        Ok(())
    }
}

/// Scalars governing the update-bound assumption and the fixed-rate
/// convergence bound: Lipschitz constant `L`, objective lower bound `F_inf`,
/// and the update-bound scalars `mu`, `M`, `M_G`.
///
/// Objectives only know `L` and `F_inf`; the update-bound scalars depend on
/// the update rule and stay unpopulated until derived. For the ZIM update
/// they are `mu = n / (sqrt(d) L + c d)`, `M = n`, `M_G = n^2 - n` (see
/// [`crate::analysis::zim_constants`]).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TheoryConstants {
    pub l: f64,
    pub f_inf: Option<f64>,
    pub mu: Option<f64>,
    pub m: Option<f64>,
    pub m_g: Option<f64>,
}

impl TheoryConstants {
    /// Constants of a smooth objective, update-bound scalars unpopulated.
    pub fn smoothness(l: f64) -> Result<Self> {
        if !l.is_finite() || l < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "Lipschitz constant must be nonnegative and finite, got {l}"
            )));
        }
        Ok(Self {
            l,
            f_inf: None,
            mu: None,
            m: None,
            m_g: None,
        })
    }

    pub fn new(l: f64, mu: f64, m: f64, m_g: f64) -> Result<Self> {
        let base = Self::smoothness(l)?;
        base.with_update_bounds(mu, m, m_g)
    }

    pub fn with_update_bounds(mut self, mu: f64, m: f64, m_g: f64) -> Result<Self> {
        if !mu.is_finite() || mu <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "mu must be positive and finite, got {mu}"
            )));
        }
        if !m.is_finite() || m < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "M must be nonnegative and finite, got {m}"
            )));
        }
        if !m_g.is_finite() || m_g < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "M_G must be nonnegative and finite, got {m_g}"
            )));
        }
        self.mu = Some(mu);
        self.m = Some(m);
        self.m_g = Some(m_g);
        Ok(self)
    }

    pub fn with_f_inf(mut self, f_inf: f64) -> Self {
        self.f_inf = Some(f_inf);
        self
    }

    /// `(mu, M, M_G)`. Panics if unpopulated: callers in the analysis module
    /// require constants derived for a concrete update rule.
    pub fn update_bounds(&self) -> (f64, f64, f64) {
        match (self.mu, self.m, self.m_g) {
            (Some(mu), Some(m), Some(m_g)) => (mu, m, m_g),
            _ => panic!("update-bound constants (mu, M, M_G) not populated"),
        }
    }
}

/// Verdict of the fixed-learning-rate admissibility check.
#[derive(Debug, Clone, PartialEq)]
pub enum ConfigVerdict {
    Valid,
    Violation(String),
}

impl ConfigVerdict {
    pub fn is_valid(&self) -> bool {
        matches!(self, ConfigVerdict::Valid)
    }
}

/// Check the fixed-rate admissibility condition `0 < r <= mu / (L * M_G)`.
///
/// With `M_G = 0` (single-trial update) the condition is vacuous and any
/// `r` in (0, 1] is accepted. Total function: invalid configurations come
/// back as a [`ConfigVerdict::Violation`] describing the failed inequality.
pub fn validate_config(cfg: &ZimConfig, consts: &TheoryConstants) -> ConfigVerdict {
    let (mu, m_g) = match (consts.mu, consts.m_g) {
        (Some(mu), Some(m_g)) => (mu, m_g),
        _ => {
            return ConfigVerdict::Violation(
                "update-bound constants (mu, M_G) not populated".into(),
            )
        }
    };
    if cfg.r <= 0.0 {
        return ConfigVerdict::Violation(format!(
            "learning rate r = {} is not positive",
            cfg.r
        ));
    }
    if m_g == 0.0 {
        return ConfigVerdict::Valid;
    }
    let cap = mu / (consts.l * m_g);
    if cfg.r <= cap {
        ConfigVerdict::Valid
    } else {
        ConfigVerdict::Violation(format!(
            "r = {} exceeds mu / (L * M_G) = {cap}",
            cfg.r
        ))
    }
}

/// Per-step diagnostics recorded by the trainer at the logging cadence.
///
/// `running_mean_grad_sq` is the arithmetic mean over steps 1..k of the
/// squared norms of the gradients used for the updates (the full objective
/// gradient on full-batch runs, where it is exactly the quantity the
/// convergence bound controls).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepRecord {
    pub k: u64,
    pub objective: f64,
    pub grad_sq_norm: f64,
    pub running_mean_grad_sq: f64,
    pub update_l1: f64,
    pub accuracy: Option<f64>,
}
