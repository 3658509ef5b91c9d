//! Chained Rosenbrock function, the nonconvex test objective:
//!
//! `F(w) = sum_{i<d} [100 (w_{i+1} - w_i^2)^2 + (1 - w_i)^2]`
//!
//! There is no global gradient Lipschitz constant; the declared `L` is the
//! largest Hessian spectral norm sampled over the box `[-2, 2]^d`.

use crate::error::{Error, Result};
use crate::objectives::Objective;
use crate::rng::RngState;
use crate::types::TheoryConstants;

const BOX_HALF_WIDTH: f64 = 2.0;
const HESSIAN_SAMPLES: usize = 256;
const SAMPLE_SEED: u64 = 0x0520_b20c;

#[derive(Debug, Clone)]
pub struct Rosenbrock {
    dim: usize,
    constants: TheoryConstants,
}

impl Rosenbrock {
    pub fn new(dim: usize) -> Result<Self> {
        if dim < 2 {
            return Err(Error::InvalidParameter(
                "chained Rosenbrock needs dimension >= 2".into(),
            ));
        }
        let l = box_lipschitz(dim)?;
        let constants = TheoryConstants::smoothness(l)?.with_f_inf(0.0);
        Ok(Self { dim, constants })
    }

    /// Hessian-vector product at `w` (tridiagonal).
    pub fn hessian_apply_at(&self, w: &[f64], v: &[f64]) -> Vec<f64> {
        assert_eq!(w.len(), self.dim);
        assert_eq!(v.len(), self.dim);
        let d = self.dim;
        let mut diag = vec![0.0; d];
        let mut off = vec![0.0; d - 1]; // H[i][i+1]
        for i in 0..d - 1 {
            diag[i] += 1200.0 * w[i] * w[i] - 400.0 * w[i + 1] + 2.0;
            diag[i + 1] += 200.0;
            off[i] = -400.0 * w[i];
        }
        let mut out = vec![0.0; d];
        for i in 0..d {
            out[i] = diag[i] * v[i];
            if i > 0 {
                out[i] += off[i - 1] * v[i - 1];
            }
            if i + 1 < d {
                out[i] += off[i] * v[i + 1];
            }
        }
        out
    }
}

impl Objective for Rosenbrock {
    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, w: &[f64]) -> f64 {
        assert_eq!(w.len(), self.dim, "weight dimension mismatch");
        let mut f = 0.0;
        for i in 0..self.dim - 1 {
            let a = w[i + 1] - w[i] * w[i];
            let b = 1.0 - w[i];
            f += 100.0 * a * a + b * b;
        }
        f
    }

    fn gradient_raw(&self, w: &[f64]) -> Vec<f64> {
        assert_eq!(w.len(), self.dim, "weight dimension mismatch");
        let d = self.dim;
        let mut g = vec![0.0; d];
        for i in 0..d - 1 {
            let a = w[i + 1] - w[i] * w[i];
            g[i] += -400.0 * w[i] * a - 2.0 * (1.0 - w[i]);
            g[i + 1] += 200.0 * a;
        }
        g
    }

    fn constants(&self) -> Option<&TheoryConstants> {
        Some(&self.constants)
    }
}

/// Largest Hessian spectral norm over the box, by sampling.
///
/// The Hessian is indefinite, so the spectral norm comes from power
/// iteration on H^2 (PSD, immune to sign oscillation). The polynomial's
/// curvature peaks at box corners, so the corner set is swept explicitly
/// (exhaustively for small dimension) on top of random interior points.
fn box_lipschitz(dim: usize) -> Result<f64> {
    let probe = Rosenbrock {
        dim,
        constants: TheoryConstants::smoothness(0.0)?,
    };
    let mut rng = RngState::new(SAMPLE_SEED);
    let mut points: Vec<Vec<f64>> = Vec::new();
    if dim <= 12 {
        for mask in 0u32..(1 << dim) {
            points.push(
                (0..dim)
                    .map(|i| {
                        if mask >> i & 1 == 1 {
                            BOX_HALF_WIDTH
                        } else {
                            -BOX_HALF_WIDTH
                        }
                    })
                    .collect(),
            );
        }
    } else {
        for _ in 0..HESSIAN_SAMPLES {
            points.push(
                (0..dim)
                    .map(|_| {
                        if rng.next_f64() < 0.5 {
                            BOX_HALF_WIDTH
                        } else {
                            -BOX_HALF_WIDTH
                        }
                    })
                    .collect(),
            );
        }
    }
    for _ in 0..HESSIAN_SAMPLES {
        points.push(
            (0..dim)
                .map(|_| rng.uniform(-BOX_HALF_WIDTH, BOX_HALF_WIDTH))
                .collect(),
        );
    }

    let mut worst = 0.0f64;
    for w in &points {
        let sq_norm = crate::analysis::power_iteration(
            |v| probe.hessian_apply_at(w, &probe.hessian_apply_at(w, v)),
            dim,
            1e-9,
            100_000,
            &mut rng,
        )?;
        worst = worst.max(sq_norm.max(0.0).sqrt());
    }
    Ok(worst)
}
