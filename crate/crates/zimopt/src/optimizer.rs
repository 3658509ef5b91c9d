//! Training loops: the discrete ZIM update on lattice weights and a plain
//! SGD baseline, with per-step diagnostics.
//!
//! A run is a pure function of (objective, method, config, seed). The seed
//! feeds three decoupled streams: weight initialization (owned by the
//! caller), batch order, and update sampling, so ZIM and SGD runs under the
//! same seed see identical starts and identical data order.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::objectives::Objective;
use crate::rng::RngState;
use crate::sampler::zim_update;
use crate::types::{GradientVector, LatticeWeights, StepRecord, UpdateVector, ZimConfig};

/// Stream id for initial-weight draws (used by callers building `w1`).
pub const STREAM_INIT: u64 = 0;
/// Stream id for epoch shuffles.
pub const STREAM_BATCH: u64 = 1;
/// Stream id for update sampling.
pub const STREAM_UPDATE: u64 = 2;

/// Consecutive zero updates after which a run is flagged as stagnated.
pub const STAGNATION_WINDOW: u64 = 50;

/// Horizon, logging cadence, and (optional) minibatching for a run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrainConfig {
    pub total_steps: u64,
    pub seeds: Vec<u64>,
    pub log_every: u64,
    pub batch_size: Option<usize>,
    /// Record classifier accuracy at logging steps (full-pass; costs one
    /// extra evaluation per record).
    pub log_accuracy: bool,
}

impl TrainConfig {
    pub fn new(total_steps: u64, seeds: Vec<u64>, log_every: u64) -> Result<Self> {
        if total_steps < 1 {
            return Err(Error::InvalidParameter("total_steps must be >= 1".into()));
        }
        if seeds.is_empty() {
            return Err(Error::InvalidParameter("seed list must be non-empty".into()));
        }
        if log_every < 1 {
            return Err(Error::InvalidParameter("log_every must be >= 1".into()));
        }
        Ok(Self {
            total_steps,
            seeds,
            log_every,
            batch_size: None,
            log_accuracy: false,
        })
    }

    pub fn with_batch_size(mut self, batch_size: usize) -> Result<Self> {
        if batch_size < 1 {
            return Err(Error::InvalidParameter("batch_size must be >= 1".into()));
        }
        self.batch_size = Some(batch_size);
        Ok(self)
    }

    pub fn with_accuracy_logging(mut self) -> Self {
        self.log_accuracy = true;
        self
    }
}

/// The update rule under test.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Method {
    Zim(ZimConfig),
    Sgd { lr: f64 },
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::Zim(_) => "zim",
            Method::Sgd { .. } => "sgd",
        }
    }
}

/// Result of one seeded run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trace {
    pub records: Vec<StepRecord>,
    pub final_weights: Vec<f64>,
    pub config_echo: String,
    pub seed: u64,
    /// First step at which [`STAGNATION_WINDOW`] consecutive zero updates
    /// were observed, if that happened.
    pub stagnated_at: Option<u64>,
}

/// One SGD step `w' = w - lr * grad`.
pub fn sgd_step(weights: &[f64], grad: &GradientVector, lr: f64) -> Result<Vec<f64>> {
    if weights.len() != grad.dim() {
        return Err(Error::DimensionMismatch {
            expected: weights.len(),
            got: grad.dim(),
        });
    }
    Ok(weights
        .iter()
        .zip(grad.as_slice())
        .map(|(w, g)| w - lr * g)
        .collect())
}

/// One ZIM step: sample the discrete update and move the lattice weights
/// `w' = w - delta * (counts ⊙ sign(grad))`. Returns the sampled update.
pub fn zim_step(
    weights: &mut LatticeWeights,
    grad: &GradientVector,
    cfg: &ZimConfig,
    rng: &mut RngState,
) -> Result<UpdateVector> {
    if weights.dim() != grad.dim() {
        return Err(Error::DimensionMismatch {
            expected: weights.dim(),
            got: grad.dim(),
        });
    }
    let update = zim_update(grad, cfg, rng);
    weights.apply(&update)?;
    Ok(update)
}

enum WeightState {
    Lattice(LatticeWeights),
    Real(Vec<f64>),
}

impl WeightState {
    fn current(&self) -> Vec<f64> {
        match self {
            WeightState::Lattice(w) => w.current(),
            WeightState::Real(w) => w.clone(),
        }
    }
}

/// Epoch-shuffled minibatch index stream.
struct Batcher {
    perm: Vec<usize>,
    batch: usize,
    pos: usize,
}

impl Batcher {
    fn new(m: usize, batch: usize, rng: &mut RngState) -> Self {
        let mut perm: Vec<usize> = (0..m).collect();
        rng.shuffle(&mut perm);
        Self {
            perm,
            batch,
            pos: 0,
        }
    }

    fn next_batch(&mut self, rng: &mut RngState) -> Vec<usize> {
        if self.pos >= self.perm.len() {
            rng.shuffle(&mut self.perm);
            self.pos = 0;
        }
        let end = (self.pos + self.batch).min(self.perm.len());
        let out = self.perm[self.pos..end].to_vec();
        self.pos = end;
        out
    }
}

/// Run one seeded training loop from the initial weights `w1`.
///
/// Record `k` describes the state *before* the k-th update: `F(w_k)`,
/// `||grad F(w_k)||^2`, the running mean of the squared training-gradient
/// norms over steps 1..k, and the l1 size of the k-th update (lattice units
/// for ZIM, `lr * ||grad||_1` for SGD). Records land at step 1, at every
/// multiple of `log_every`, and at the final step.
///
/// On minibatch runs the objective and gradient norm in a record are
/// recomputed on the full objective; the running mean is over the minibatch
/// gradients actually used (the two coincide on full-batch runs, which is
/// what every theory check consumes).
///
/// A non-finite objective or gradient aborts with the step index.
pub fn train(
    objective: &dyn Objective,
    method: &Method,
    cfg: &TrainConfig,
    w1: &[f64],
    seed: u64,
) -> Result<Trace> {
    if w1.len() != objective.dim() {
        return Err(Error::DimensionMismatch {
            expected: objective.dim(),
            got: w1.len(),
        });
    }
    let mut batch_rng = RngState::with_stream(seed, STREAM_BATCH);
    let mut update_rng = RngState::with_stream(seed, STREAM_UPDATE);

    let mut batcher = match (cfg.batch_size, objective.num_samples()) {
        (Some(b), Some(m)) => Some(Batcher::new(m, b.min(m), &mut batch_rng)),
        (Some(_), None) => {
            return Err(Error::InvalidParameter(
                "batch_size set but the objective has no sample set".into(),
            ))
        }
        (None, _) => None,
    };

    let mut state = match method {
        Method::Zim(z) => WeightState::Lattice(LatticeWeights::new(w1.to_vec(), z.delta)?),
        Method::Sgd { .. } => WeightState::Real(w1.to_vec()),
    };

    let mut records = Vec::new();
    let mut grad_sq_sum = 0.0f64;
    let mut zero_run = 0u64;
    let mut stagnated_at = None;

    for k in 1..=cfg.total_steps {
        let w = state.current();
        let logging = k == 1 || k % cfg.log_every == 0 || k == cfg.total_steps;

        let batch = batcher.as_mut().map(|b| b.next_batch(&mut batch_rng));
        let grad_train = match &batch {
            Some(idx) => GradientVector::new(objective.batch_gradient_raw(&w, idx)),
            None => GradientVector::new(objective.gradient_raw(&w)),
        }
        .map_err(|e| Error::NumericFailure {
            step: k,
            reason: e.to_string(),
        })?;
        grad_sq_sum += grad_train.sq_norm();

        let diagnostics = if logging {
            let objective_value = objective.value(&w);
            if !objective_value.is_finite() {
                return Err(Error::NumericFailure {
                    step: k,
                    reason: "objective value is not finite".into(),
                });
            }
            let full_grad_sq = match &batch {
                Some(_) => {
                    let full = GradientVector::new(objective.gradient_raw(&w)).map_err(|e| {
                        Error::NumericFailure {
                            step: k,
                            reason: e.to_string(),
                        }
                    })?;
                    full.sq_norm()
                }
                None => grad_train.sq_norm(),
            };
            let accuracy = if cfg.log_accuracy {
                objective.accuracy(&w)
            } else {
                None
            };
            Some((objective_value, full_grad_sq, accuracy))
        } else {
            None
        };

        let update_l1 = match (method, &mut state) {
            (Method::Zim(zcfg), WeightState::Lattice(weights)) => {
                let update = zim_update(&grad_train, zcfg, &mut update_rng);
                weights.apply(&update)?;
                if update.is_zero() {
                    zero_run += 1;
                    if zero_run >= STAGNATION_WINDOW && stagnated_at.is_none() {
                        stagnated_at = Some(k);
                    }
                } else {
                    zero_run = 0;
                }
                update.l1_norm() as f64
            }
            (Method::Sgd { lr }, WeightState::Real(weights)) => {
                let next = sgd_step(weights, &grad_train, *lr)?;
                *weights = next;
                lr * grad_train.l1_norm()
            }
            _ => unreachable!("state constructed from method"),
        };

        if let Some((objective_value, full_grad_sq, accuracy)) = diagnostics {
            records.push(StepRecord {
                k,
                objective: objective_value,
                grad_sq_norm: full_grad_sq,
                running_mean_grad_sq: grad_sq_sum / k as f64,
                update_l1,
                accuracy,
            });
        }
    }

    let config_echo = serde_json::json!({
        "seed": seed,
        "method": method,
        "total_steps": cfg.total_steps,
        "log_every": cfg.log_every,
        "batch_size": cfg.batch_size,
        "log_accuracy": cfg.log_accuracy,
    })
    .to_string();

    Ok(Trace {
        records,
        final_weights: state.current(),
        config_echo,
        seed,
        stagnated_at,
    })
}
