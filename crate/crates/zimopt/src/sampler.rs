//! The zero-inflated multinomial update.
//!
//! A draw allocates `n` trials over `d + 1` slots: slot 0 is a no-op with
//! probability `1 - r`, and slot `i >= 1` carries probability `r * q_i`
//! where `q` is the smoothed, normalized absolute gradient
//!
//! ```text
//! q_i = (|g_i| + c) / (||g||_1 + c d).
//! ```
//!
//! The returned update is the slot-1..d count vector signed by the gradient,
//! so its expectation is proportional to the gradient itself. Closed forms
//! for the first and second moments are implemented next to the sampler and
//! are verified independently by enumeration and Monte Carlo in
//! [`crate::verify`].

use serde::Serialize;

use crate::error::{Error, Result};
use crate::rng::RngState;
use crate::types::{GradientVector, ProbabilityVector, UpdateVector, ZimConfig};

/// First and second moments of an update distribution: `E[update]` and
/// `E[||update||_2^2]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ZimMoments {
    pub mean: Vec<f64>,
    pub second_moment_sq_norm: f64,
}

/// Category probabilities `q_i = (|g_i| + c) / (||g||_1 + c d)`.
///
/// Rejects `c <= 0`: the smoothing term is what keeps `q` defined at a zero
/// gradient.
pub fn build_probabilities(grad: &GradientVector, c: f64) -> Result<ProbabilityVector> {
    if !c.is_finite() || c <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "smoothing constant c must be positive and finite, got {c}"
        )));
    }
    let weights: Vec<f64> = grad.as_slice().iter().map(|g| g.abs() + c).collect();
    // compensated sum: at large d a naive denominator would push sum(q)
    // outside the normalization tolerance
    let denom = crate::types::neumaier_sum(&weights);
    ProbabilityVector::new(weights.into_iter().map(|w| w / denom).collect())
}

/// Prepend the no-op slot: `p_0 = 1 - r`, `p_i = r * q_i`.
pub fn augment_with_zero_inflation(
    q: &ProbabilityVector,
    r: f64,
) -> Result<ProbabilityVector> {
    if !(0.0..=1.0).contains(&r) || !r.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "zero-inflation probability r must be in [0, 1], got {r}"
        )));
    }
    let mut p = Vec::with_capacity(q.len() + 1);
    p.push(1.0 - r);
    p.extend(q.as_slice().iter().map(|&qi| r * qi));
    ProbabilityVector::new(p)
}

/// Draw `Multinomial(n, p)` counts over the augmented slots and drop slot 0.
///
/// Sequential conditional-binomial decomposition: slot counts are drawn in
/// order with renormalized tail probabilities, which is exact, O(d) per
/// draw, and stops as soon as all `n` trials are assigned. The returned
/// counts are nonnegative with total at most `n`.
pub fn sample_zim(n: u64, p: &ProbabilityVector, rng: &mut RngState) -> UpdateVector {
    let slots = p.as_slice();
    assert!(
        slots.len() >= 2,
        "augmented probability vector needs the no-op slot plus at least one category"
    );
    let d = slots.len() - 1;
    let mut counts = vec![0i64; d];
    let mut remaining = n;
    let mut tail = 1.0f64;
    for (i, &pi) in slots.iter().enumerate() {
        if remaining == 0 {
            break;
        }
        // Once the remaining tail mass is (numerically) all on this slot,
        // the conditional probability is 1 and the rest of the trials land
        // here.
        let x = if i == slots.len() - 1 || tail <= pi {
            remaining
        } else {
            rng.binomial(remaining, (pi / tail).clamp(0.0, 1.0))
        };
        if i > 0 {
            counts[i - 1] = x as i64;
        }
        remaining -= x;
        tail -= pi;
    }
    UpdateVector::new(counts, n).expect("conditional-binomial counts respect the trial budget")
}

/// One ZIM update draw: multinomial counts signed by the gradient.
///
/// `sign(0) = 0`: a coordinate with exactly zero gradient never moves, even
/// though the smoothing mass `q_i` still assigns it draws (those trials are
/// spent and zeroed).
pub fn zim_update(grad: &GradientVector, cfg: &ZimConfig, rng: &mut RngState) -> UpdateVector {
    let q = build_probabilities(grad, cfg.c).expect("ZimConfig guarantees c > 0");
    let p = augment_with_zero_inflation(&q, cfg.r).expect("ZimConfig guarantees r in [0, 1]");
    let counts = sample_zim(cfg.n, &p, rng);
    let steps: Vec<i64> = counts
        .as_slice()
        .iter()
        .zip(grad.as_slice())
        .map(|(&x, &g)| x * sign(g))
        .collect();
    UpdateVector::new(steps, cfg.n).expect("signing cannot grow the l1 norm")
}

fn sign(g: f64) -> i64 {
    if g > 0.0 {
        1
    } else if g < 0.0 {
        -1
    } else {
        0
    }
}

/// Closed-form moments of the ZIM update:
///
/// ```text
/// E[update]            = n r (g + c sign(g)) / (||g||_1 + c d)
/// E[||update||_2^2]    = n r + r^2 (n^2 - n) sum_i q_i^2
/// ```
///
/// The second-moment expression takes `sign^2 = 1` on every coordinate; on a
/// coordinate with exactly zero gradient the realized update is identically
/// zero under `sign(0) = 0`, so there the expression overcounts by that
/// coordinate's count contribution. All random gradients are unaffected;
/// see the wasted-mass test in [`crate::verify`].
pub fn closed_form_moments(grad: &GradientVector, cfg: &ZimConfig) -> ZimMoments {
    let q = build_probabilities(grad, cfg.c).expect("ZimConfig guarantees c > 0");
    let nf = cfg.n as f64;
    let nr = nf * cfg.r;
    let denom = grad.l1_norm() + cfg.c * grad.dim() as f64;
    let mean = grad
        .as_slice()
        .iter()
        .map(|&g| nr * (g + cfg.c * sign(g) as f64) / denom)
        .collect();
    let sum_q_sq: f64 = q.as_slice().iter().map(|qi| qi * qi).sum();
    ZimMoments {
        mean,
        second_moment_sq_norm: nr + cfg.r * cfg.r * (nf * nf - nf) * sum_q_sq,
    }
}

/// Moments of the raw (unsigned) zero-inflated multinomial counts:
/// `E[y_i] = n r q_i` and `E[||y||^2] = n r + r^2 (n^2 - n) sum_i q_i^2`.
pub fn raw_zim_moments(n: u64, r: f64, q: &ProbabilityVector) -> ZimMoments {
    let nf = n as f64;
    let mean = q.as_slice().iter().map(|&qi| nf * r * qi).collect();
    let sum_q_sq: f64 = q.as_slice().iter().map(|qi| qi * qi).sum();
    ZimMoments {
        mean,
        second_moment_sq_norm: nf * r + r * r * (nf * nf - nf) * sum_q_sq,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grad(values: &[f64]) -> GradientVector {
        GradientVector::new(values.to_vec()).unwrap()
    }

    #[test]
    fn probabilities_follow_absolute_gradient_as_c_vanishes() {
        let q = build_probabilities(&grad(&[3.0, -1.0]), 1e-15).unwrap();
        assert!((q.as_slice()[0] - 0.75).abs() < 1e-12);
        assert!((q.as_slice()[1] - 0.25).abs() < 1e-12);
    }

    #[test]
    fn probabilities_uniform_at_zero_gradient() {
        let q = build_probabilities(&grad(&[0.0, 0.0, 0.0]), 1.0).unwrap();
        for &qi in q.as_slice() {
            assert_eq!(qi, 1.0 / 3.0);
        }
    }

    #[test]
    fn probabilities_formula_value() {
        // (|3| + 1) / (4 + 2) and (|-1| + 1) / (4 + 2)
        let q = build_probabilities(&grad(&[3.0, -1.0]), 1.0).unwrap();
        assert!((q.as_slice()[0] - 4.0 / 6.0).abs() < 1e-15);
        assert!((q.as_slice()[1] - 2.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn probabilities_reject_nonpositive_smoothing() {
        assert!(build_probabilities(&grad(&[1.0]), 0.0).is_err());
        assert!(build_probabilities(&grad(&[1.0]), -1.0).is_err());
    }

    #[test]
    fn probabilities_frequency_cross_check() {
        // Empirical category frequencies over one-trial draws match q.
        let q = build_probabilities(&grad(&[3.0, -1.0]), 1.0).unwrap();
        let p = augment_with_zero_inflation(&q, 1.0).unwrap();
        let mut rng = RngState::new(7);
        let n_draws = 1_000_000u64;
        let mut counts = [0u64; 2];
        for _ in 0..n_draws {
            let y = sample_zim(1, &p, &mut rng);
            for (c, &v) in counts.iter_mut().zip(y.as_slice()) {
                *c += v as u64;
            }
        }
        for (i, &qi) in q.as_slice().iter().enumerate() {
            let freq = counts[i] as f64 / n_draws as f64;
            let se = (qi * (1.0 - qi) / n_draws as f64).sqrt();
            assert!(
                (freq - qi).abs() <= 4.0 * se,
                "category {i}: freq {freq} vs q {qi}"
            );
        }
    }

    #[test]
    fn augmentation_edge_cases() {
        let q = ProbabilityVector::new(vec![0.5, 0.5]).unwrap();
        let all_noop = augment_with_zero_inflation(&q, 0.0).unwrap();
        assert_eq!(all_noop.as_slice(), &[1.0, 0.0, 0.0]);
        let no_noop = augment_with_zero_inflation(&q, 1.0).unwrap();
        assert_eq!(no_noop.as_slice(), &[0.0, 0.5, 0.5]);
    }

    #[test]
    fn augmentation_formula_value() {
        let q = ProbabilityVector::new(vec![0.2, 0.3, 0.5]).unwrap();
        let p = augment_with_zero_inflation(&q, 0.3).unwrap();
        let expected = [0.7, 0.06, 0.09, 0.15];
        for (got, want) in p.as_slice().iter().zip(expected) {
            assert!((got - want).abs() < 1e-15);
        }
    }

    #[test]
    fn augmentation_rejects_bad_r() {
        let q = ProbabilityVector::new(vec![1.0]).unwrap();
        assert!(augment_with_zero_inflation(&q, -0.1).is_err());
        assert!(augment_with_zero_inflation(&q, 1.5).is_err());
    }

    #[test]
    fn sample_zim_all_mass_on_noop_gives_zero_vector() {
        let q = ProbabilityVector::new(vec![0.4, 0.6]).unwrap();
        let p = augment_with_zero_inflation(&q, 0.0).unwrap();
        for seed in 0..100 {
            let mut rng = RngState::new(seed);
            let y = sample_zim(5, &p, &mut rng);
            assert!(y.is_zero(), "seed {seed}");
        }
    }

    #[test]
    fn sample_zim_single_category_takes_all_trials() {
        let q = ProbabilityVector::new(vec![1.0]).unwrap();
        let p = augment_with_zero_inflation(&q, 1.0).unwrap();
        for seed in 0..100 {
            let mut rng = RngState::new(seed);
            let y = sample_zim(3, &p, &mut rng);
            assert_eq!(y.as_slice(), &[3]);
        }
    }

    #[test]
    fn sample_zim_empirical_mean_matches_first_moment() {
        // E[y] = n r q = (0.3, 0.45, 0.75) for n=5, r=0.3, q=(0.2,0.3,0.5).
        let q = ProbabilityVector::new(vec![0.2, 0.3, 0.5]).unwrap();
        let p = augment_with_zero_inflation(&q, 0.3).unwrap();
        let mut rng = RngState::new(2024);
        let n_draws = 1_000_000u64;
        let mut sums = [0u64; 3];
        for _ in 0..n_draws {
            let y = sample_zim(5, &p, &mut rng);
            for (s, &v) in sums.iter_mut().zip(y.as_slice()) {
                *s += v as u64;
            }
        }
        let expected = [0.3, 0.45, 0.75];
        for i in 0..3 {
            let mean = sums[i] as f64 / n_draws as f64;
            let pi = p.as_slice()[i + 1];
            let var = 5.0 * pi * (1.0 - pi);
            let se = (var / n_draws as f64).sqrt();
            assert!(
                (mean - expected[i]).abs() <= 3.0 * se,
                "coordinate {i}: mean {mean} vs {}",
                expected[i]
            );
        }
    }

    #[test]
    fn update_signs_follow_gradient() {
        let g = grad(&[-2.0]);
        let cfg = ZimConfig::new(4, 1.0, 1.0, 1.0).unwrap();
        for seed in 0..50 {
            let mut rng = RngState::new(seed);
            let u = zim_update(&g, &cfg, &mut rng);
            assert_eq!(u.as_slice(), &[-4]); // single category, negative sign
        }
    }

    #[test]
    fn update_mean_closed_form() {
        // E = n r (g + c sign g) / (||g||_1 + c d) = (10/3, -5/3).
        let g = grad(&[3.0, -1.0]);
        let cfg = ZimConfig::new(10, 0.5, 1.0, 1.0).unwrap();
        let m = closed_form_moments(&g, &cfg);
        assert!((m.mean[0] - 10.0 / 3.0).abs() < 1e-12);
        assert!((m.mean[1] + 5.0 / 3.0).abs() < 1e-12);

        // Monte Carlo cross-check.
        let mut rng = RngState::new(5);
        let n_draws = 200_000;
        let mut sums = [0f64; 2];
        for _ in 0..n_draws {
            let u = zim_update(&g, &cfg, &mut rng);
            for (s, &v) in sums.iter_mut().zip(u.as_slice()) {
                *s += v as f64;
            }
        }
        let q = build_probabilities(&g, 1.0).unwrap();
        for (i, &sum) in sums.iter().enumerate() {
            let mean = sum / n_draws as f64;
            let pi = cfg.r * q.as_slice()[i];
            let var = cfg.n as f64 * pi * (1.0 - pi);
            let se = (var / n_draws as f64).sqrt();
            assert!(
                (mean - m.mean[i]).abs() <= 4.0 * se,
                "coordinate {i}: {mean} vs {}",
                m.mean[i]
            );
        }
    }

    #[test]
    fn zero_gradient_update_is_identically_zero() {
        // sign(0) = 0 kills every coordinate regardless of the draw.
        let g = grad(&[0.0, 0.0]);
        let cfg = ZimConfig::new(8, 0.9, 0.5, 1.0).unwrap();
        let m = closed_form_moments(&g, &cfg);
        assert_eq!(m.mean, vec![0.0, 0.0]);
        for seed in 0..50 {
            let mut rng = RngState::new(seed);
            assert!(zim_update(&g, &cfg, &mut rng).is_zero());
        }
    }

    #[test]
    fn second_moment_closed_form_value() {
        // grad (1,2,4), c=1 gives q=(0.2,0.3,0.5); n=5, r=0.3:
        // E||y||^2 = 1.5 + 0.09 * 20 * 0.38 = 2.184.
        let g = grad(&[1.0, 2.0, 4.0]);
        let cfg = ZimConfig::new(5, 0.3, 1.0, 1.0).unwrap();
        let m = closed_form_moments(&g, &cfg);
        assert!((m.second_moment_sq_norm - 2.184).abs() < 1e-12);

        let q = ProbabilityVector::new(vec![0.2, 0.3, 0.5]).unwrap();
        let raw = raw_zim_moments(5, 0.3, &q);
        assert!((raw.second_moment_sq_norm - 2.184).abs() < 1e-12);
    }

    #[test]
    fn degenerate_r_and_single_trial_moments() {
        let g = grad(&[1.0, -2.0]);
        let zero_rate = ZimConfig::new(5, 0.0, 1.0, 1.0).unwrap();
        let m = closed_form_moments(&g, &zero_rate);
        assert_eq!(m.mean, vec![0.0, 0.0]);
        assert_eq!(m.second_moment_sq_norm, 0.0);

        // n = 1: the pair-count term n^2 - n vanishes, E||y||^2 = r.
        for r in [0.1, 0.5, 1.0] {
            let cfg = ZimConfig::new(1, r, 1.0, 1.0).unwrap();
            let m = closed_form_moments(&g, &cfg);
            assert_eq!(m.second_moment_sq_norm, r);
        }
    }

    #[test]
    fn raw_moments_deterministic_cases() {
        // n=2, r=0.5, q=(1): outcomes 0/1/2 with probs 0.25/0.5/0.25.
        let q = ProbabilityVector::new(vec![1.0]).unwrap();
        let m = raw_zim_moments(2, 0.5, &q);
        assert_eq!(m.mean, vec![1.0]);
        assert!((m.second_moment_sq_norm - 1.5).abs() < 1e-15);

        let m = raw_zim_moments(7, 1.0, &q);
        assert_eq!(m.mean, vec![7.0]);
        assert_eq!(m.second_moment_sq_norm, 49.0);
    }

    #[test]
    fn negating_gradient_negates_mean_exactly() {
        let g = grad(&[0.3, -1.7, 2.2]);
        let neg = grad(&[-0.3, 1.7, -2.2]);
        let cfg = ZimConfig::new(6, 0.4, 0.25, 1.0).unwrap();
        let m = closed_form_moments(&g, &cfg);
        let mn = closed_form_moments(&neg, &cfg);
        for (a, b) in m.mean.iter().zip(&mn.mean) {
            assert_eq!(*a, -*b);
        }
        assert_eq!(m.second_moment_sq_norm, mn.second_moment_sq_norm);
    }

    #[test]
    fn seed_paired_draws_flip_signs_with_gradient() {
        // Same |grad| and same seed: counts agree, signs follow the gradient.
        let g = grad(&[0.5, -1.5, 3.0]);
        let neg = grad(&[-0.5, 1.5, -3.0]);
        let cfg = ZimConfig::new(5, 0.7, 0.1, 1.0).unwrap();
        for seed in 0..50 {
            let mut ra = RngState::new(seed);
            let mut rb = RngState::new(seed);
            let ua = zim_update(&g, &cfg, &mut ra);
            let ub = zim_update(&neg, &cfg, &mut rb);
            for (a, b) in ua.as_slice().iter().zip(ub.as_slice()) {
                assert_eq!(*a, -*b);
            }
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            /// Every sampled update respects the trial budget, whatever the
            /// seed or configuration.
            #[test]
            fn l1_norm_within_trial_budget(
                seed in any::<u64>(),
                n in 1u64..=32,
                r in 0.0f64..=1.0,
                values in proptest::collection::vec(-10.0f64..10.0, 1..6),
            ) {
                let g = GradientVector::new(values).unwrap();
                let cfg = ZimConfig::new(n, r, 0.5, 1.0).unwrap();
                let mut rng = RngState::new(seed);
                let u = zim_update(&g, &cfg, &mut rng);
                prop_assert!(u.l1_norm() <= n);
            }

            /// q is scale-invariant: scaling the gradient and the smoothing
            /// constant together leaves the probabilities unchanged.
            #[test]
            fn probabilities_homogeneous_in_scale(
                values in proptest::collection::vec(-5.0f64..5.0, 1..6),
                c in 0.01f64..2.0,
                t in 0.01f64..100.0,
            ) {
                let g = GradientVector::new(values.clone()).unwrap();
                let scaled = GradientVector::new(values.iter().map(|v| v * t).collect()).unwrap();
                let q = build_probabilities(&g, c).unwrap();
                let qs = build_probabilities(&scaled, c * t).unwrap();
                for (a, b) in q.as_slice().iter().zip(qs.as_slice()) {
                    prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(*b));
                }
            }
        }
    }
}
