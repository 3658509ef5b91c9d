//! `zimopt bounds`: print the update-bound constants, the asymptotic floor,
//! the comparison against the boolean-update reference scheme, and (when an
//! objective gap and horizon are given) the transient term and bound total.
//!
//! Output is `key = value` lines so scripts can parse it.

use zimopt::analysis::{asymptotic_floor, bold_comparison, bound_terms, zim_constants};

pub struct BoundsArgs {
    pub l: f64,
    pub d: usize,
    pub c: f64,
    pub n: u64,
    pub gap: Option<f64>,
    pub steps: Option<u64>,
    pub alpha: Option<f64>,
}

pub fn run(args: &BoundsArgs) -> Result<(), (i32, String)> {
    if args.l < 0.0 || !args.l.is_finite() {
        return Err((1, format!("L must be nonnegative, got {}", args.l)));
    }
    if !args.c.is_finite() || args.c <= 0.0 || args.d == 0 || args.n == 0 {
        return Err((1, "need c > 0, d >= 1, n >= 1".into()));
    }

    let consts = zim_constants(args.n, args.c, args.d, args.l);
    let (mu, m, m_g) = consts.update_bounds();
    let floor = asymptotic_floor(&consts);
    let cmp = bold_comparison(args.l, args.d, args.c);

    println!("n = {}", args.n);
    println!("d = {}", args.d);
    println!("c = {}", args.c);
    println!("L = {}", args.l);
    println!("mu = {mu}");
    println!("M = {m}");
    println!("M_G = {m_g}");
    println!("floor = {floor}");
    println!("ours = {}", cmp.ours);
    println!("bold = {}", cmp.bold);

    match (args.gap, args.steps) {
        (Some(gap), Some(steps)) => {
            if steps == 0 || !gap.is_finite() || gap <= 0.0 {
                return Err((1, "need gap > 0 and steps >= 1".into()));
            }
            let alpha = match args.alpha {
                Some(a) => a,
                // default to the largest admissible fixed rate, or 1 when
                // the admissibility condition is vacuous
                None if m_g > 0.0 && args.l > 0.0 => mu / (args.l * m_g),
                None => 1.0,
            };
            if !alpha.is_finite() || alpha <= 0.0 || alpha > 1.0 {
                return Err((1, format!("alpha must be in (0, 1], got {alpha}")));
            }
            let (transient, _, total) = bound_terms(&consts, alpha, steps, gap);
            println!("alpha = {alpha}");
            println!("steps = {steps}");
            println!("gap = {gap}");
            println!("transient = {transient:.6e}");
            println!("total = {total}");
        }
        (None, None) => {}
        _ => return Err((1, "gap and steps must be given together".into())),
    }
    Ok(())
}
