//! Theory evaluation: the constants of the ZIM update bound, the fixed-rate
//! convergence bound, the per-step inequality checks, descent-lemma Monte
//! Carlo, gradient checking, and Lipschitz estimation.
//!
//! Tolerance policy: proven inequalities are checked with zero tolerance
//! plus `64 * eps * magnitude` rounding slack; Monte Carlo claims use
//! 4-standard-error bands. Inequality checks use the closed-form moments,
//! never sampling, so a failure there is arithmetic, not luck.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::objectives::Objective;
use crate::optimizer::Trace;
use crate::rng::RngState;
use crate::sampler::{closed_form_moments, zim_update};
use crate::types::{
    validate_config, ConfigVerdict, GradientVector, TheoryConstants, ZimConfig,
};

/// Rounding slack for proven inequalities: 64 ulps at the operands' scale.
fn rounding_slack(a: f64, b: f64) -> f64 {
    64.0 * f64::EPSILON * a.abs().max(b.abs())
}

/// Update-bound constants for the ZIM update:
/// `mu = n / (sqrt(d) L + c d)`, `M = n`, `M_G = n^2 - n`.
pub fn zim_constants(n: u64, c: f64, d: usize, l: f64) -> TheoryConstants {
    assert!(n >= 1, "trial count must be >= 1");
    assert!(c > 0.0 && c.is_finite(), "smoothing constant must be positive");
    assert!(d >= 1, "dimension must be >= 1");
    assert!(l >= 0.0 && l.is_finite(), "Lipschitz constant must be >= 0");
    let nf = n as f64;
    let df = d as f64;
    let mu = nf / (df.sqrt() * l + c * df);
    TheoryConstants::new(l, mu, nf, nf * nf - nf).expect("validated above")
}

/// The asymptotic floor `L M / mu` of the fixed-rate bound. For ZIM
/// constants this equals `L (sqrt(d) L + c d)`, independent of the trial
/// count and the learning rate.
pub fn asymptotic_floor(consts: &TheoryConstants) -> f64 {
    let (mu, m, _) = consts.update_bounds();
    consts.l * m / mu
}

/// Our floor next to the reference discrete scheme's `2 d L` bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoldComparison {
    pub ours: f64,
    pub bold: f64,
}

/// Side-by-side floor comparison: `ours = L (sqrt(d) L + c d)` versus the
/// boolean-update reference, whose bound scales as `2 d L`.
pub fn bold_comparison(l: f64, d: usize, c: f64) -> BoldComparison {
    let df = d as f64;
    BoldComparison {
        ours: l * (df.sqrt() * l + c * df),
        bold: 2.0 * df * l,
    }
}

/// Evaluation of the fixed-rate bound against an observed trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundReport {
    /// `2 (F(w_1) - F_inf) / (K mu alpha)`.
    pub transient: f64,
    /// `L M / mu`.
    pub floor: f64,
    /// `transient + floor`.
    pub total: f64,
    /// Final running mean of the squared gradient norm.
    pub observed: f64,
    pub satisfied: bool,
}

/// The two terms of the bound for a horizon `K` and initial gap
/// `F(w_1) - F_inf`; returns `(transient, floor, total)`.
pub fn bound_terms(
    consts: &TheoryConstants,
    alpha_bar: f64,
    steps: u64,
    f_gap: f64,
) -> (f64, f64, f64) {
    assert!(steps >= 1, "bound horizon must be >= 1");
    assert!(alpha_bar > 0.0, "learning rate must be positive");
    let (mu, _, _) = consts.update_bounds();
    let transient = 2.0 * f_gap / (steps as f64 * mu * alpha_bar);
    let floor = asymptotic_floor(consts);
    (transient, floor, transient + floor)
}

/// Evaluate the fixed-rate bound against a finished trace.
///
/// Refuses traces whose configuration fails [`validate_config`]: the bound
/// is only proven for admissible learning rates. `observed` is the final
/// record's running mean of the squared gradient norm, so the trace must
/// cover every step (full-batch gradients).
pub fn evaluate_bound(
    trace: &Trace,
    cfg: &ZimConfig,
    consts: &TheoryConstants,
    f_w1: f64,
    f_inf: f64,
) -> Result<BoundReport> {
    if let ConfigVerdict::Violation(why) = validate_config(cfg, consts) {
        return Err(Error::InvalidParameter(format!(
            "bound not applicable: {why}"
        )));
    }
    let last = trace
        .records
        .last()
        .ok_or_else(|| Error::InvalidParameter("trace has no records".into()))?;
    let (transient, floor, total) = bound_terms(consts, cfg.r, last.k, f_w1 - f_inf);
    let observed = last.running_mean_grad_sq;
    Ok(BoundReport {
        transient,
        floor,
        total,
        observed,
        satisfied: observed <= total,
    })
}

/// One evaluation of the dot-product bound
/// `grad . E[update] >= r mu ||grad||^2` (exact closed forms, no sampling).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DotBoundCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
    /// Whether `||grad||_1 <= sqrt(d) L`, the regime in which the constant
    /// `mu` is derived. Out-of-regime inputs are flagged, not rejected.
    pub in_regime: bool,
}

pub fn check_dot_bound(
    grad: &GradientVector,
    cfg: &ZimConfig,
    consts: &TheoryConstants,
) -> DotBoundCheck {
    let (mu, _, _) = consts.update_bounds();
    let moments = closed_form_moments(grad, cfg);
    let lhs: f64 = grad
        .as_slice()
        .iter()
        .zip(&moments.mean)
        .map(|(g, m)| g * m)
        .sum();
    let rhs = cfg.r * mu * grad.sq_norm();
    let regime_cap = (grad.dim() as f64).sqrt() * consts.l;
    DotBoundCheck {
        lhs,
        rhs,
        holds: lhs >= rhs - rounding_slack(lhs, rhs),
        in_regime: grad.l1_norm() <= regime_cap + rounding_slack(grad.l1_norm(), regime_cap),
    }
}

/// One evaluation of the second-moment bound
/// `E||update||^2 <= r M + r^2 M_G ||grad||^2` (exact closed forms).
///
/// This inequality is not proven for every input: with `M_G = n^2 - n` it
/// needs `sum q_i^2 <= ||grad||^2`, which fails for very small gradients
/// under smoothing. Failures are reported, not raised.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MomentBoundCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

pub fn check_moment_bound(
    grad: &GradientVector,
    cfg: &ZimConfig,
    consts: &TheoryConstants,
) -> MomentBoundCheck {
    let (_, m, m_g) = consts.update_bounds();
    let lhs = closed_form_moments(grad, cfg).second_moment_sq_norm;
    let rhs = cfg.r * m + cfg.r * cfg.r * m_g * grad.sq_norm();
    MomentBoundCheck {
        lhs,
        rhs,
        holds: lhs <= rhs + rounding_slack(lhs, rhs),
    }
}

/// Monte Carlo check of the per-step expected-decrease inequality
/// `E[F(w_{k+1})] - F(w_k) <= -(mu - alpha L M_G / 2) alpha ||grad||^2
///  + alpha L M / 2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DescentLemmaCheck {
    pub lhs_estimate: f64,
    pub std_error: f64,
    pub rhs: f64,
    /// `rhs + 4 se - lhs`; nonnegative when the check holds.
    pub margin: f64,
    pub holds: bool,
}

/// Estimate `E[F(w - update)] - F(w)` over `samples` independent ZIM draws
/// (unit lattice step, matching the theory) and compare against the lemma's
/// right-hand side with a 4-standard-error band.
pub fn check_descent_lemma(
    objective: &dyn Objective,
    w: &[f64],
    cfg: &ZimConfig,
    consts: &TheoryConstants,
    samples: u64,
    rng: &mut RngState,
) -> Result<DescentLemmaCheck> {
    if samples < 1000 {
        return Err(Error::InvalidParameter(format!(
            "{samples} samples is too noisy for a descent-lemma estimate; need >= 1000"
        )));
    }
    let (mu, m, m_g) = consts.update_bounds();
    let grad = objective.gradient(w)?;
    let f0 = objective.value(w);
    if !f0.is_finite() {
        return Err(Error::NonFinite("objective value".into()));
    }
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    let mut moved = w.to_vec();
    for _ in 0..samples {
        let update = zim_update(&grad, cfg, rng);
        for ((mw, &orig), &s) in moved.iter_mut().zip(w).zip(update.as_slice()) {
            *mw = orig - s as f64;
        }
        let diff = objective.value(&moved) - f0;
        sum += diff;
        sum_sq += diff * diff;
    }
    let n = samples as f64;
    let lhs = sum / n;
    let var = (sum_sq / n - lhs * lhs).max(0.0) * n / (n - 1.0);
    let se = (var / n).sqrt();
    let alpha = cfg.r;
    let rhs = -(mu - 0.5 * alpha * consts.l * m_g) * alpha * grad.sq_norm()
        + 0.5 * alpha * consts.l * m;
    let margin = rhs + 4.0 * se - lhs;
    Ok(DescentLemmaCheck {
        lhs_estimate: lhs,
        std_error: se,
        rhs,
        margin,
        holds: margin >= -rounding_slack(lhs, rhs),
    })
}

/// Central-difference gradient check. Returns the maximum over coordinates
/// of `|fd - analytic| / max(1, |fd|, |analytic|)`.
pub fn finite_diff_gradcheck(objective: &dyn Objective, w: &[f64], h: f64) -> f64 {
    assert!(h > 0.0, "finite-difference step must be positive");
    let analytic = objective.gradient_raw(w);
    let mut probe = w.to_vec();
    let mut worst = 0.0f64;
    for i in 0..w.len() {
        let orig = probe[i];
        probe[i] = orig + h;
        let f_plus = objective.value(&probe);
        probe[i] = orig - h;
        let f_minus = objective.value(&probe);
        probe[i] = orig;
        let fd = (f_plus - f_minus) / (2.0 * h);
        let denom = 1.0f64.max(fd.abs()).max(analytic[i].abs());
        worst = worst.max((fd - analytic[i]).abs() / denom);
    }
    worst
}

/// Same check restricted to a subset of coordinates (for large models where
/// a full sweep is too slow).
pub fn finite_diff_gradcheck_coords(
    objective: &dyn Objective,
    w: &[f64],
    h: f64,
    coords: &[usize],
) -> f64 {
    assert!(h > 0.0, "finite-difference step must be positive");
    let analytic = objective.gradient_raw(w);
    let mut probe = w.to_vec();
    let mut worst = 0.0f64;
    for &i in coords {
        let orig = probe[i];
        probe[i] = orig + h;
        let f_plus = objective.value(&probe);
        probe[i] = orig - h;
        let f_minus = objective.value(&probe);
        probe[i] = orig;
        let fd = (f_plus - f_minus) / (2.0 * h);
        let denom = 1.0f64.max(fd.abs()).max(analytic[i].abs());
        worst = worst.max((fd - analytic[i]).abs() / denom);
    }
    worst
}

/// Dominant eigenvalue (largest magnitude) of a symmetric linear map by
/// power iteration on the Rayleigh quotient.
pub fn power_iteration(
    apply: impl Fn(&[f64]) -> Vec<f64>,
    dim: usize,
    rel_tol: f64,
    max_iters: usize,
    rng: &mut RngState,
) -> Result<f64> {
    assert!(dim >= 1);
    let mut v: Vec<f64> = (0..dim).map(|_| rng.uniform(-1.0, 1.0)).collect();
    let norm = l2_norm(&v);
    if norm == 0.0 {
        v[0] = 1.0;
    } else {
        v.iter_mut().for_each(|x| *x /= norm);
    }
    let mut lambda = f64::INFINITY;
    for _ in 0..max_iters {
        let av = apply(&v);
        let rayleigh: f64 = v.iter().zip(&av).map(|(a, b)| a * b).sum();
        let norm = l2_norm(&av);
        if norm == 0.0 {
            // v is in the kernel; for PSD maps started from a random vector
            // this means the map is zero.
            return Ok(0.0);
        }
        if (rayleigh - lambda).abs() <= rel_tol * rayleigh.abs().max(f64::MIN_POSITIVE) {
            return Ok(rayleigh);
        }
        lambda = rayleigh;
        v = av;
        v.iter_mut().for_each(|x| *x /= norm);
    }
    Err(Error::NoConvergence(max_iters))
}

/// Largest Hessian eigenvalue of an objective exposing its Hessian as a
/// linear map; falls back to the declared constant otherwise.
pub fn estimate_lipschitz(objective: &dyn Objective, rng: &mut RngState) -> Result<f64> {
    let d = objective.dim();
    let zero = vec![0.0; d];
    if objective.hessian_apply(&zero).is_some() {
        let lambda = power_iteration(
            |v| objective.hessian_apply(v).expect("hessian map available"),
            d,
            1e-12,
            10_000,
            rng,
        )?;
        return Ok(lambda.abs());
    }
    objective
        .constants()
        .map(|c| c.l)
        .ok_or_else(|| {
            Error::InvalidParameter(
                "objective exposes neither a Hessian map nor a declared Lipschitz constant"
                    .into(),
            )
        })
}

fn l2_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Internal helper shared by tests and the verification suite: a random
/// gradient with l1 norm `scale * sqrt(d) * L`.
pub fn random_gradient_with_l1(
    d: usize,
    l: f64,
    scale: f64,
    rng: &mut RngState,
) -> GradientVector {
    let mut values: Vec<f64> = (0..d).map(|_| rng.uniform(-1.0, 1.0)).collect();
    let l1: f64 = values.iter().map(|v| v.abs()).sum();
    if l1 > 0.0 {
        let target = scale * (d as f64).sqrt() * l;
        values.iter_mut().for_each(|v| *v *= target / l1);
    }
    GradientVector::new(values).expect("finite by construction")
}
