//! Distribution- and inequality-level verification.
//!
//! Three independent routes pin the sampler and the closed-form moments to
//! each other:
//!
//! 1. exact enumeration of every multinomial outcome for small trial counts
//!    and dimensions (this module's oracle, sharing no code with the
//!    sampler or the closed forms),
//! 2. Monte Carlo estimates over a parameter grid with 4-standard-error
//!    bands,
//! 3. the proven inequalities (dot bound, admissible-regime moment bound,
//!    descent lemma), checked with closed forms and rounding slack only.
//!
//! The second-moment bound with `M_G = n^2 - n` is *not* proven for
//! arbitrarily small gradients (it needs `sum q_i^2 <= ||grad||^2`); the
//! sweep records such counterexamples informationally and only hard-fails
//! inside the proven regime.

use serde::Serialize;

use crate::analysis::{
    check_descent_lemma, check_dot_bound, check_moment_bound, random_gradient_with_l1,
    zim_constants,
};
use crate::objectives::Quadratic;
use crate::rng::RngState;
use crate::sampler::{
    augment_with_zero_inflation, build_probabilities, closed_form_moments, raw_zim_moments,
    sample_zim, zim_update, ZimMoments,
};
use crate::types::{GradientVector, ProbabilityVector, UpdateVector, ZimConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum VerifyLevel {
    Quick,
    Full,
}

/// One named check. `hard` checks are proven statements whose failure is an
/// implementation bug; soft checks are documentation of known limits.
#[derive(Debug, Clone, Serialize)]
pub struct CheckOutcome {
    pub name: String,
    pub passed: bool,
    pub hard: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyReport {
    pub level: VerifyLevel,
    pub checks: Vec<CheckOutcome>,
}

impl VerifyReport {
    pub fn hard_failures(&self) -> usize {
        self.checks.iter().filter(|c| c.hard && !c.passed).count()
    }

    pub fn passed(&self) -> bool {
        self.hard_failures() == 0
    }
}

// ---------------------------------------------------------------------------
// Exact enumeration oracle
// ---------------------------------------------------------------------------

fn factorial(k: u64) -> f64 {
    (1..=k).map(|i| i as f64).product()
}

fn multinomial_pmf(counts: &[u64], probs: &[f64]) -> f64 {
    let n: u64 = counts.iter().sum();
    let mut v = factorial(n);
    for (&x, &p) in counts.iter().zip(probs) {
        v /= factorial(x);
        v *= p.powi(x as i32); // 0^0 = 1 covers zero-probability empty slots
    }
    v
}

/// Visit every outcome of `Multinomial(n, p)` with its exact probability.
pub fn for_each_multinomial_outcome(
    n: u64,
    probs: &[f64],
    visit: &mut impl FnMut(&[u64], f64),
) {
    fn recurse(
        slot: usize,
        remaining: u64,
        probs: &[f64],
        counts: &mut Vec<u64>,
        visit: &mut impl FnMut(&[u64], f64),
    ) {
        if slot == probs.len() - 1 {
            counts[slot] = remaining;
            let p = multinomial_pmf(counts, probs);
            visit(counts, p);
            counts[slot] = 0;
            return;
        }
        for x in 0..=remaining {
            counts[slot] = x;
            recurse(slot + 1, remaining - x, probs, counts, visit);
        }
        counts[slot] = 0;
    }
    let mut counts = vec![0u64; probs.len()];
    recurse(0, n, probs, &mut counts, visit);
}

/// Exact moments of the raw zero-inflated counts by full enumeration.
pub fn enumerated_raw_moments(n: u64, r: f64, q: &ProbabilityVector) -> ZimMoments {
    let p = augment_with_zero_inflation(q, r).expect("valid r");
    let d = q.len();
    let mut mean = vec![0.0; d];
    let mut second = 0.0;
    for_each_multinomial_outcome(n, p.as_slice(), &mut |counts, prob| {
        for i in 0..d {
            let y = counts[i + 1] as f64;
            mean[i] += prob * y;
            second += prob * y * y;
        }
    });
    ZimMoments {
        mean,
        second_moment_sq_norm: second,
    }
}

/// Exact moments of the signed update by full enumeration, including the
/// `sign(0) = 0` behavior on zero-gradient coordinates.
pub fn enumerated_update_moments(grad: &GradientVector, cfg: &ZimConfig) -> ZimMoments {
    let q = build_probabilities(grad, cfg.c).expect("valid c");
    let p = augment_with_zero_inflation(&q, cfg.r).expect("valid r");
    let d = grad.dim();
    let signs: Vec<f64> = grad
        .as_slice()
        .iter()
        .map(|&g| {
            if g > 0.0 {
                1.0
            } else if g < 0.0 {
                -1.0
            } else {
                0.0
            }
        })
        .collect();
    let mut mean = vec![0.0; d];
    let mut second = 0.0;
    for_each_multinomial_outcome(cfg.n, p.as_slice(), &mut |counts, prob| {
        for i in 0..d {
            let step = counts[i + 1] as f64 * signs[i];
            mean[i] += prob * step;
            second += prob * step * step;
        }
    });
    ZimMoments {
        mean,
        second_moment_sq_norm: second,
    }
}

// ---------------------------------------------------------------------------
// Monte Carlo moment statistics
// ---------------------------------------------------------------------------

/// Summary of a Monte Carlo moment comparison: per-coordinate mean z-scores
/// against exact variances, and the squared-norm z-score against the sample
/// variance.
#[derive(Debug, Clone, Serialize)]
pub struct MomentCheckStats {
    pub draws: u64,
    pub max_mean_z: f64,
    pub second_z: f64,
    pub passed: bool,
}

/// Accumulate `draws` samples and compare against expected per-coordinate
/// means (with exact variances `mean_vars`) and the expected squared norm.
/// A statistic passes within 4 standard errors; degenerate (zero-variance)
/// statistics must match exactly.
pub fn mc_moment_stats(
    mut sample: impl FnMut(&mut RngState) -> UpdateVector,
    expected_mean: &[f64],
    mean_vars: &[f64],
    expected_second: f64,
    draws: u64,
    rng: &mut RngState,
) -> MomentCheckStats {
    let d = expected_mean.len();
    let mut sums = vec![0i64; d];
    let mut sq_sum = 0.0f64;
    let mut sq_sq_sum = 0.0f64;
    for _ in 0..draws {
        let u = sample(rng);
        debug_assert_eq!(u.dim(), d);
        let mut sq = 0.0;
        for (acc, &v) in sums.iter_mut().zip(u.as_slice()) {
            *acc += v;
            sq += (v * v) as f64;
        }
        sq_sum += sq;
        sq_sq_sum += sq * sq;
    }

    let n = draws as f64;
    let mut max_mean_z = 0.0f64;
    let mut passed = true;
    for i in 0..d {
        let emp = sums[i] as f64 / n;
        let z = if mean_vars[i] > 0.0 {
            (emp - expected_mean[i]) / (mean_vars[i] / n).sqrt()
        } else if emp == expected_mean[i] {
            0.0
        } else {
            f64::INFINITY
        };
        max_mean_z = max_mean_z.max(z.abs());
        if z.abs() > 4.0 {
            passed = false;
        }
    }

    let emp_second = sq_sum / n;
    let sample_var = ((sq_sq_sum / n - emp_second * emp_second) * n / (n - 1.0)).max(0.0);
    let second_z = if sample_var > 0.0 {
        (emp_second - expected_second) / (sample_var / n).sqrt()
    } else if (emp_second - expected_second).abs() <= 1e-9 * expected_second.abs().max(1.0) {
        0.0
    } else {
        f64::INFINITY
    };
    if second_z.abs() > 4.0 {
        passed = false;
    }

    MomentCheckStats {
        draws,
        max_mean_z,
        second_z,
        passed,
    }
}

// ---------------------------------------------------------------------------
// The verification grid
// ---------------------------------------------------------------------------

const GRID_R: [f64; 3] = [0.1, 0.5, 1.0];
const GRID_C: [f64; 2] = [0.01, 1.0];
const GRID_D: [usize; 2] = [3, 10];

/// One grid cell of the Monte Carlo moment suite.
#[derive(Debug, Clone, Serialize)]
pub struct MomentTask {
    pub n: u64,
    pub r: f64,
    pub c: f64,
    pub d: usize,
    pub rep: usize,
    pub draws: u64,
    pub seed: u64,
}

impl MomentTask {
    pub fn label(&self) -> String {
        format!(
            "moments n={} r={} c={} d={} rep={}",
            self.n, self.r, self.c, self.d, self.rep
        )
    }
}

/// Grid of Monte Carlo moment checks. `Full` is the acceptance-grade grid
/// (`n` up to 20, 20 gradient draws per cell, 10^6 samples each); `Quick`
/// shrinks it to something that finishes in seconds.
pub fn moment_tasks(level: VerifyLevel, base_seed: u64) -> Vec<MomentTask> {
    let (ns, reps, draws): (&[u64], usize, u64) = match level {
        VerifyLevel::Quick => (&[1, 5], 3, 100_000),
        VerifyLevel::Full => (&[1, 5, 20], 20, 1_000_000),
    };
    let mut tasks = Vec::new();
    let mut counter = 0u64;
    for &n in ns {
        for &r in &GRID_R {
            for &c in &GRID_C {
                for &d in &GRID_D {
                    for rep in 0..reps {
                        counter += 1;
                        tasks.push(MomentTask {
                            n,
                            r,
                            c,
                            d,
                            rep,
                            draws,
                            seed: base_seed.wrapping_add(counter.wrapping_mul(0x9e37_79b9_7f4a_7c15)),
                        });
                    }
                }
            }
        }
    }
    tasks
}

/// Run one grid cell: a random gradient, one Monte Carlo stream of raw ZIM
/// draws, checked against the raw closed form; the signed closed form is
/// tied to the raw one algebraically and the signed sampler is checked via
/// seed-paired draws.
pub fn run_moment_task(task: &MomentTask) -> CheckOutcome {
    let mut grad_rng = RngState::with_stream(task.seed, 1);
    let values: Vec<f64> = (0..task.d)
        .map(|_| {
            // avoid exact zeros so the signed closed form applies verbatim
            let v = grad_rng.uniform(-2.0, 2.0);
            if v == 0.0 {
                1e-9
            } else {
                v
            }
        })
        .collect();
    let grad = GradientVector::new(values).expect("finite");
    let cfg = ZimConfig::new(task.n, task.r, task.c, 1.0).expect("grid values are valid");

    let q = build_probabilities(&grad, task.c).expect("c > 0");
    let p = augment_with_zero_inflation(&q, task.r).expect("r in range");
    let raw = raw_zim_moments(task.n, task.r, &q);
    let update = closed_form_moments(&grad, &cfg);

    // Signed mean must equal the signed raw mean coordinate-for-coordinate.
    let mut formula_consistent = true;
    for i in 0..task.d {
        let sign = grad.as_slice()[i].signum();
        let tied = sign * raw.mean[i];
        if (tied - update.mean[i]).abs() > 1e-12 * tied.abs().max(1.0) {
            formula_consistent = false;
        }
    }
    if (raw.second_moment_sq_norm - update.second_moment_sq_norm).abs()
        > 1e-12 * raw.second_moment_sq_norm.max(1.0)
    {
        formula_consistent = false;
    }

    let vars: Vec<f64> = (0..task.d)
        .map(|i| {
            let pi = p.as_slice()[i + 1];
            task.n as f64 * pi * (1.0 - pi)
        })
        .collect();
    let mut mc_rng = RngState::with_stream(task.seed, 2);
    let stats = mc_moment_stats(
        |rng| sample_zim(task.n, &p, rng),
        &raw.mean,
        &vars,
        raw.second_moment_sq_norm,
        task.draws,
        &mut mc_rng,
    );

    // Seed-paired signed draws: the update must be the raw counts times the
    // gradient signs, draw for draw.
    let mut pair_ok = true;
    let mut rng_a = RngState::with_stream(task.seed, 3);
    let mut rng_b = RngState::with_stream(task.seed, 3);
    for _ in 0..64 {
        let y = sample_zim(task.n, &p, &mut rng_a);
        let u = zim_update(&grad, &cfg, &mut rng_b);
        for i in 0..task.d {
            let expect = y.as_slice()[i] * grad.as_slice()[i].signum() as i64;
            if u.as_slice()[i] != expect {
                pair_ok = false;
            }
        }
    }

    let passed = stats.passed && formula_consistent && pair_ok;
    CheckOutcome {
        name: task.label(),
        passed,
        hard: true,
        detail: format!(
            "max mean |z| = {:.2}, second-moment z = {:.2}, draws = {}{}{}",
            stats.max_mean_z,
            stats.second_z,
            task.draws,
            if formula_consistent {
                ""
            } else {
                "; closed-form tie mismatch"
            },
            if pair_ok { "" } else { "; sign pairing broke" },
        ),
    }
}

/// Exhaustive equivalence of the closed forms with enumeration over every
/// outcome, for all `n <= max_n`, `d <= max_d`.
pub fn enumeration_equivalence(max_n: u64, max_d: usize, tol: f64) -> CheckOutcome {
    let mut worst = 0.0f64;
    let mut cases = 0usize;
    let mut grad_rng = RngState::new(0x0e2a_11ce);
    for n in 1..=max_n {
        for d in 1..=max_d {
            for &r in &[0.0, 0.1, 0.5, 1.0] {
                for &c in &GRID_C {
                    for _rep in 0..3 {
                        let values: Vec<f64> = (0..d)
                            .map(|_| {
                                let v = grad_rng.uniform(-3.0, 3.0);
                                if v == 0.0 {
                                    0.5
                                } else {
                                    v
                                }
                            })
                            .collect();
                        let grad = GradientVector::new(values).expect("finite");
                        let cfg = ZimConfig::new(n, r, c, 1.0).expect("valid");
                        let q = build_probabilities(&grad, c).expect("valid");

                        let formula = raw_zim_moments(n, r, &q);
                        let exact = enumerated_raw_moments(n, r, &q);
                        for (a, b) in formula.mean.iter().zip(&exact.mean) {
                            worst = worst.max((a - b).abs());
                        }
                        worst = worst.max(
                            (formula.second_moment_sq_norm - exact.second_moment_sq_norm).abs(),
                        );

                        let formula = closed_form_moments(&grad, &cfg);
                        let exact = enumerated_update_moments(&grad, &cfg);
                        for (a, b) in formula.mean.iter().zip(&exact.mean) {
                            worst = worst.max((a - b).abs());
                        }
                        worst = worst.max(
                            (formula.second_moment_sq_norm - exact.second_moment_sq_norm).abs(),
                        );
                        cases += 1;
                    }
                }
            }
        }
    }
    CheckOutcome {
        name: format!("enumeration equivalence (n <= {max_n}, d <= {max_d})"),
        passed: worst <= tol,
        hard: true,
        detail: format!("{cases} cases, worst |formula - enumeration| = {worst:.3e}"),
    }
}

/// With `sign(0) = 0`, smoothing mass on an exactly-zero coordinate is spent
/// on draws that get zeroed, so the enumerated second moment dips strictly
/// below the closed-form expression. Documented behavior, not a bug.
pub fn wasted_mass_documentation() -> CheckOutcome {
    let grad = GradientVector::new(vec![1.0, 0.0, 2.0]).expect("finite");
    let cfg = ZimConfig::new(4, 0.8, 0.5, 1.0).expect("valid");
    let formula = closed_form_moments(&grad, &cfg);
    let exact = enumerated_update_moments(&grad, &cfg);
    let gap = formula.second_moment_sq_norm - exact.second_moment_sq_norm;
    CheckOutcome {
        name: "wasted mass on zero-gradient coordinates".into(),
        passed: gap > 0.0 && exact.mean[1] == 0.0,
        hard: false,
        detail: format!(
            "closed form {:.6} vs enumerated {:.6} (gap {:.3e}); frozen coordinate mean = {}",
            formula.second_moment_sq_norm, exact.second_moment_sq_norm, gap, exact.mean[1]
        ),
    }
}

/// Dot-product bound sweep over the grid: in-regime random gradients must
/// satisfy the bound without exception.
pub fn dot_bound_sweep(level: VerifyLevel, base_seed: u64) -> CheckOutcome {
    let (ns, per_combo): (&[u64], usize) = match level {
        VerifyLevel::Quick => (&[1, 5], 100),
        VerifyLevel::Full => (&[1, 5, 20], 1000),
    };
    let l = 1.0;
    let mut rng = RngState::new(base_seed);
    let mut failures = 0usize;
    let mut out_of_regime = 0usize;
    let mut total = 0usize;
    for &n in ns {
        for &r in &GRID_R {
            for &c in &GRID_C {
                for &d in &GRID_D {
                    let consts = zim_constants(n, c, d, l);
                    let cfg = ZimConfig::new(n, r, c, 1.0).expect("valid");
                    for _ in 0..per_combo {
                        let scale = rng.uniform(1e-4, 1.0);
                        let grad = random_gradient_with_l1(d, l, scale, &mut rng);
                        let check = check_dot_bound(&grad, &cfg, &consts);
                        total += 1;
                        if !check.in_regime {
                            out_of_regime += 1;
                        }
                        if !check.holds {
                            failures += 1;
                        }
                    }
                }
            }
        }
    }
    CheckOutcome {
        name: "dot bound sweep".into(),
        passed: failures == 0 && out_of_regime == 0,
        hard: true,
        detail: format!("{total} in-regime gradients, {failures} failures"),
    }
}

/// Second-moment bound sweep. Hard requirement only where the bound is
/// provable (`sum q_i^2 <= ||grad||^2`); elsewhere counterexamples are
/// tallied informationally.
pub fn moment_bound_sweep(level: VerifyLevel, base_seed: u64) -> CheckOutcome {
    let (ns, per_combo): (&[u64], usize) = match level {
        VerifyLevel::Quick => (&[1, 5], 100),
        VerifyLevel::Full => (&[1, 5, 20], 1000),
    };
    let l = 1.0;
    let mut rng = RngState::new(base_seed);
    let mut proven_failures = 0usize;
    let mut counterexamples = 0usize;
    let mut total = 0usize;
    for &n in ns {
        for &r in &GRID_R {
            for &c in &GRID_C {
                for &d in &GRID_D {
                    let consts = zim_constants(n, c, d, l);
                    let cfg = ZimConfig::new(n, r, c, 1.0).expect("valid");
                    for _ in 0..per_combo {
                        // log-uniform magnitudes reach the small-gradient regime
                        let scale = 10f64.powf(rng.uniform(-6.0, 0.0));
                        let grad = random_gradient_with_l1(d, l, scale, &mut rng);
                        let q = build_probabilities(&grad, c).expect("valid");
                        let sum_q_sq: f64 =
                            q.as_slice().iter().map(|qi| qi * qi).sum();
                        let provable = sum_q_sq <= grad.sq_norm();
                        let check = check_moment_bound(&grad, &cfg, &consts);
                        total += 1;
                        if !check.holds {
                            if provable {
                                proven_failures += 1;
                            } else {
                                counterexamples += 1;
                            }
                        }
                    }
                }
            }
        }
    }
    CheckOutcome {
        name: "second-moment bound sweep".into(),
        passed: proven_failures == 0,
        hard: true,
        detail: format!(
            "{total} gradients: {proven_failures} failures in the provable regime, \
             {counterexamples} known small-gradient counterexamples (informational)"
        ),
    }
}

/// Descent-lemma Monte Carlo sweep on the identity quadratic.
///
/// Points are sampled inside the regime where the update-bound assumption is
/// provable (`||grad||_1` between 0.5 and 1.0 times `sqrt(d) L`); the lemma
/// presupposes that assumption.
pub fn descent_lemma_sweep(
    points: usize,
    samples: u64,
    base_seed: u64,
) -> CheckOutcome {
    let d = 5;
    let l = 1.0;
    let objective = Quadratic::isotropic(d, 1.0).expect("valid quadratic");
    let consts = zim_constants(5, 0.01, d, l);
    let (mu, _, m_g) = consts.update_bounds();
    let alpha = mu / (l * m_g);
    let cfg = ZimConfig::new(5, alpha, 0.01, 1.0).expect("valid");
    let mut rng = RngState::new(base_seed);
    let mut failures = 0usize;
    let mut worst_margin = f64::INFINITY;
    for _ in 0..points {
        let scale = rng.uniform(0.5, 1.0);
        let w = random_gradient_with_l1(d, l, scale, &mut rng);
        let mut mc_rng = RngState::with_stream(rng.next_u64(), 4);
        let check = check_descent_lemma(
            &objective,
            w.as_slice(),
            &cfg,
            &consts,
            samples,
            &mut mc_rng,
        )
        .expect("enough samples");
        worst_margin = worst_margin.min(check.margin);
        if !check.holds {
            failures += 1;
        }
    }
    CheckOutcome {
        name: "descent lemma sweep".into(),
        passed: failures == 0,
        hard: true,
        detail: format!(
            "{points} points x {samples} draws, {failures} failures, worst margin {worst_margin:.4e}"
        ),
    }
}

/// Sequential convenience runner (the CLI parallelizes the grid itself).
pub fn run_suite(level: VerifyLevel, base_seed: u64) -> VerifyReport {
    let mut checks = Vec::new();
    for task in moment_tasks(level, base_seed) {
        checks.push(run_moment_task(&task));
    }
    let (max_n, max_d) = match level {
        VerifyLevel::Quick => (3, 2),
        VerifyLevel::Full => (4, 3),
    };
    checks.push(enumeration_equivalence(max_n, max_d, 1e-12));
    checks.push(wasted_mass_documentation());
    checks.push(dot_bound_sweep(level, base_seed ^ 0xd07));
    checks.push(moment_bound_sweep(level, base_seed ^ 0x202));
    let (points, samples) = match level {
        VerifyLevel::Quick => (10, 20_000),
        VerifyLevel::Full => (100, 100_000),
    };
    checks.push(descent_lemma_sweep(points, samples, base_seed ^ 0xde5));
    VerifyReport { level, checks }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn enumeration_matches_hand_computed_binomial() {
        // n=2, r=0.5, q=(1): y in {0,1,2} with probs (0.25, 0.5, 0.25).
        let q = ProbabilityVector::new(vec![1.0]).unwrap();
        let exact = enumerated_raw_moments(2, 0.5, &q);
        assert!((exact.mean[0] - 1.0).abs() < 1e-15);
        assert!((exact.second_moment_sq_norm - 1.5).abs() < 1e-15);
    }

    #[test]
    fn enumeration_outcome_probabilities_sum_to_one() {
        let p = [0.3, 0.25, 0.25, 0.2];
        for n in 1..=4 {
            let mut total = 0.0;
            for_each_multinomial_outcome(n, &p, &mut |_, prob| total += prob);
            assert!((total - 1.0).abs() < 1e-12, "n = {n}: {total}");
        }
    }

    #[test]
    fn single_trial_enumeration_gives_r() {
        let grad = GradientVector::new(vec![0.7, -0.2]).unwrap();
        for r in [0.1, 0.5, 1.0] {
            let cfg = ZimConfig::new(1, r, 0.5, 1.0).unwrap();
            let exact = enumerated_update_moments(&grad, &cfg);
            assert!((exact.second_moment_sq_norm - r).abs() < 1e-15);
        }
    }

    #[test]
    fn quick_suite_passes() {
        let report = run_suite(VerifyLevel::Quick, 20_260_809);
        for check in &report.checks {
            assert!(
                check.passed || !check.hard,
                "{}: {}",
                check.name,
                check.detail
            );
        }
        assert!(report.passed());
    }

    #[test]
    fn tampered_zero_inflation_is_caught() {
        // Shift 2% of the no-op mass onto the first category and keep the
        // vector normalized: the Monte Carlo moment check must flag it.
        let grad = GradientVector::new(vec![1.0, -0.5, 0.25]).unwrap();
        let n = 5;
        let r = 0.4;
        let q = build_probabilities(&grad, 0.5).unwrap();
        let honest = augment_with_zero_inflation(&q, r).unwrap();
        let mut skewed = honest.as_slice().to_vec();
        let eps = 0.02;
        skewed[0] -= eps;
        skewed[1] += eps;
        let tampered = ProbabilityVector::new(skewed).unwrap();

        let expected = raw_zim_moments(n, r, &q);
        let vars: Vec<f64> = (1..=3)
            .map(|i| {
                let pi = honest.as_slice()[i];
                n as f64 * pi * (1.0 - pi)
            })
            .collect();
        let mut rng = RngState::new(55);
        let stats = mc_moment_stats(
            |rng| sample_zim(n, &tampered, rng),
            &expected.mean,
            &vars,
            expected.second_moment_sq_norm,
            200_000,
            &mut rng,
        );
        assert!(!stats.passed, "tampered sampler slipped through: {stats:?}");

        // Control: the honest sampler passes the identical check.
        let mut rng = RngState::new(55);
        let stats = mc_moment_stats(
            |rng| sample_zim(n, &honest, rng),
            &expected.mean,
            &vars,
            expected.second_moment_sq_norm,
            200_000,
            &mut rng,
        );
        assert!(stats.passed, "honest sampler failed its own check: {stats:?}");
    }

    #[test]
    fn off_by_one_trial_count_is_caught() {
        let grad = GradientVector::new(vec![0.8, -1.2]).unwrap();
        let n = 6;
        let r = 0.5;
        let q = build_probabilities(&grad, 0.25).unwrap();
        let p = augment_with_zero_inflation(&q, r).unwrap();
        let expected = raw_zim_moments(n, r, &q);
        let vars: Vec<f64> = (1..=2)
            .map(|i| {
                let pi = p.as_slice()[i];
                n as f64 * pi * (1.0 - pi)
            })
            .collect();
        let mut rng = RngState::new(77);
        let stats = mc_moment_stats(
            |rng| sample_zim(n - 1, &p, rng), // tampered: one trial short
            &expected.mean,
            &vars,
            expected.second_moment_sq_norm,
            200_000,
            &mut rng,
        );
        assert!(!stats.passed);
    }

    #[test]
    fn wasted_mass_gap_is_strict() {
        let outcome = wasted_mass_documentation();
        assert!(outcome.passed, "{}", outcome.detail);
    }
}
