//! End-to-end check of the fixed-rate convergence bound on a short run:
//! train the discrete update on the identity quadratic, evaluate the bound,
//! and confirm the observed running gradient-norm average sits under it.

use zimopt::analysis::{evaluate_bound, zim_constants};
use zimopt::objectives::{Objective, Quadratic};
use zimopt::optimizer::{train, Method, TrainConfig};
use zimopt::types::{validate_config, ZimConfig};

#[test]
fn short_quadratic_run_satisfies_the_bound() {
    let d = 10;
    let objective = Quadratic::isotropic(d, 1.0).unwrap();
    let consts = zim_constants(5, 0.01, d, 1.0).with_f_inf(0.0);
    let (mu, _, m_g) = consts.update_bounds();
    let alpha = mu / m_g;
    let zim = ZimConfig::new(5, alpha, 0.01, 1.0).unwrap();
    assert!(validate_config(&zim, &consts).is_valid());

    let w1: Vec<f64> = vec![(100.0f64 / d as f64).sqrt(); d];
    let f_w1 = objective.value(&w1);
    let cfg = TrainConfig::new(2_000, vec![1, 2, 3], 500).unwrap();

    let mut observed = Vec::new();
    let mut total = None;
    for &seed in &cfg.seeds {
        let trace = train(&objective, &Method::Zim(zim), &cfg, &w1, seed).unwrap();
        assert_eq!(trace.records.last().unwrap().k, 2_000);
        let report = evaluate_bound(&trace, &zim, &consts, f_w1, 0.0).unwrap();
        assert!(report.satisfied, "seed {seed}: {report:?}");
        observed.push(report.observed);
        total = Some(report.total);
    }
    let mean = observed.iter().sum::<f64>() / observed.len() as f64;
    assert!(mean <= total.unwrap());
}

#[test]
fn bound_refuses_inadmissible_rates() {
    let d = 4;
    let objective = Quadratic::isotropic(d, 1.0).unwrap();
    let consts = zim_constants(5, 0.01, d, 1.0).with_f_inf(0.0);
    // far above mu / (L M_G)
    let zim = ZimConfig::new(5, 0.9, 0.01, 1.0).unwrap();
    let cfg = TrainConfig::new(50, vec![1], 10).unwrap();
    let w1 = vec![2.0; d];
    let trace = train(&objective, &Method::Zim(zim), &cfg, &w1, 1).unwrap();
    let err = evaluate_bound(&trace, &zim, &consts, objective.value(&w1), 0.0);
    assert!(err.is_err());
}
