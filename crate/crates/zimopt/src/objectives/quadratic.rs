//! Quadratic form `F(w) = 0.5 w^T A w - b^T w` with symmetric PSD `A`.
//!
//! Satisfies the smoothness assumption exactly: `L = lambda_max(A)`, and the
//! analytic minimum supplies `F_inf`.

use crate::error::{Error, Result};
use crate::objectives::{dot, Objective};
use crate::rng::RngState;
use crate::types::TheoryConstants;

// Internal seed for the power iteration's start vector; fixed so that
// construction is deterministic.
const POWER_SEED: u64 = 0x712d_a5e1;

#[derive(Debug, Clone)]
pub struct Quadratic {
    a: Vec<f64>, // row-major d x d
    b: Vec<f64>,
    dim: usize,
    constants: TheoryConstants,
}

impl Quadratic {
    /// Build from matrix rows. `A` must be square and exactly symmetric.
    pub fn new(a_rows: Vec<Vec<f64>>, b: Vec<f64>) -> Result<Self> {
        let d = a_rows.len();
        if d == 0 {
            return Err(Error::InvalidParameter("A must be non-empty".into()));
        }
        if b.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: b.len(),
            });
        }
        let mut a = Vec::with_capacity(d * d);
        for row in &a_rows {
            if row.len() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    got: row.len(),
                });
            }
            a.extend_from_slice(row);
        }
        for i in 0..d {
            for j in (i + 1)..d {
                if a[i * d + j] != a[j * d + i] {
                    return Err(Error::InvalidParameter(format!(
                        "A is not symmetric at ({i}, {j})"
                    )));
                }
            }
        }

        let l = dominant_eigenvalue(&a, d)?;
        let f_inf = analytic_minimum(&a, &b, d)?;
        let constants = TheoryConstants::smoothness(l)?.with_f_inf(f_inf);
        Ok(Self {
            a,
            b,
            dim: d,
            constants,
        })
    }

    /// `F(w) = 0.5 lambda ||w||^2` (A = lambda I, b = 0).
    pub fn isotropic(dim: usize, lambda: f64) -> Result<Self> {
        let mut rows = vec![vec![0.0; dim]; dim];
        for (i, row) in rows.iter_mut().enumerate() {
            row[i] = lambda;
        }
        Self::new(rows, vec![0.0; dim])
    }

    /// Diagonal Hessian, b = 0.
    pub fn diagonal(diag: Vec<f64>) -> Result<Self> {
        let d = diag.len();
        let mut rows = vec![vec![0.0; d]; d];
        for (i, row) in rows.iter_mut().enumerate() {
            row[i] = diag[i];
        }
        Self::new(rows, vec![0.0; d])
    }

    pub fn lipschitz(&self) -> f64 {
        self.constants.l
    }

    pub fn f_inf(&self) -> f64 {
        self.constants.f_inf.expect("set at construction")
    }

    fn apply_a(&self, v: &[f64]) -> Vec<f64> {
        let d = self.dim;
        (0..d).map(|i| dot(&self.a[i * d..(i + 1) * d], v)).collect()
    }
}

impl Objective for Quadratic {
    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, w: &[f64]) -> f64 {
        assert_eq!(w.len(), self.dim, "weight dimension mismatch");
        0.5 * dot(w, &self.apply_a(w)) - dot(&self.b, w)
    }

    fn gradient_raw(&self, w: &[f64]) -> Vec<f64> {
        assert_eq!(w.len(), self.dim, "weight dimension mismatch");
        let mut g = self.apply_a(w);
        for (gi, bi) in g.iter_mut().zip(&self.b) {
            *gi -= bi;
        }
        g
    }

    fn constants(&self) -> Option<&TheoryConstants> {
        Some(&self.constants)
    }

    fn hessian_apply(&self, v: &[f64]) -> Option<Vec<f64>> {
        assert_eq!(v.len(), self.dim, "vector dimension mismatch");
        Some(self.apply_a(v))
    }
}

fn dominant_eigenvalue(a: &[f64], d: usize) -> Result<f64> {
    // A diagonal matrix has its spectrum on the diagonal; taking it exactly
    // keeps downstream theory constants free of estimation noise.
    let diagonal_only = (0..d).all(|i| (0..d).all(|j| i == j || a[i * d + j] == 0.0));
    if diagonal_only {
        return Ok((0..d).map(|i| a[i * d + i].abs()).fold(0.0, f64::max));
    }
    let apply = |v: &[f64]| {
        let mut out = vec![0.0; d];
        for i in 0..d {
            out[i] = dot(&a[i * d..(i + 1) * d], v);
        }
        out
    };
    let mut rng = RngState::new(POWER_SEED);
    crate::analysis::power_iteration(apply, d, 1e-12, 10_000, &mut rng)
}

/// Minimum of the quadratic: solve `A w = b` by conjugate gradients.
fn analytic_minimum(a: &[f64], b: &[f64], d: usize) -> Result<f64> {
    if b.iter().all(|&x| x == 0.0) {
        return Ok(0.0);
    }
    let apply = |v: &[f64]| {
        let mut out = vec![0.0; d];
        for i in 0..d {
            out[i] = dot(&a[i * d..(i + 1) * d], v);
        }
        out
    };
    let mut x = vec![0.0; d];
    let mut r = b.to_vec();
    let mut p = r.clone();
    let mut rs = dot(&r, &r);
    let b_norm_sq = rs.max(f64::MIN_POSITIVE);
    for _ in 0..20 * d {
        if rs <= 1e-28 * b_norm_sq {
            break;
        }
        let ap = apply(&p);
        let p_ap = dot(&p, &ap);
        if p_ap <= 0.0 {
            return Err(Error::InvalidParameter(
                "quadratic appears unbounded below (A singular along b)".into(),
            ));
        }
        let alpha = rs / p_ap;
        for i in 0..d {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let rs_new = dot(&r, &r);
        let beta = rs_new / rs;
        for i in 0..d {
            p[i] = r[i] + beta * p[i];
        }
        rs = rs_new;
    }
    if rs > 1e-20 * b_norm_sq {
        return Err(Error::NoConvergence(20 * d));
    }
    // F(x*) = 0.5 x*^T A x* - b^T x* = -0.5 b^T x* at the solution
    Ok(-0.5 * dot(b, &x))
}
