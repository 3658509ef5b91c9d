//! `zimopt train`: run every (method, seed) pair from a config file, write
//! one CSV per run plus a JSON summary with mean/std bands across seeds.

use std::fs;
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use zimopt::analysis::{evaluate_bound, zim_constants, BoundReport};
use zimopt::optimizer::{train, Method, Trace};
use zimopt::types::{validate_config, ConfigVerdict, StepRecord};
use zimopt::Error;

use crate::config::{exit_code_for, Experiment, ExperimentConfig};

pub struct TrainArgs<'a> {
    pub config_text: &'a str,
    pub out_dir: &'a Path,
    pub workers: Option<usize>,
}

struct RunOutput {
    method: &'static str,
    seed: u64,
    trace: Trace,
    test_accuracy: Option<f64>,
    bound: Option<BoundReport>,
}

pub fn run(args: &TrainArgs) -> Result<(), (i32, String)> {
    let config = ExperimentConfig::from_toml(args.config_text).map_err(|e| (1, e))?;
    let experiment = config.resolve().map_err(|e| (1, e))?;

    // Theory gate: a ZIM run on an objective with known constants and a unit
    // lattice must use an admissible learning rate, and then gets its bound
    // evaluated.
    let theory = theory_constants(&experiment);
    if let (Some(zim), Some(consts)) = (&experiment.zim, &theory) {
        if let ConfigVerdict::Violation(why) = validate_config(zim, consts) {
            return Err((1, format!("inadmissible ZIM configuration: {why}")));
        }
    }

    fs::create_dir_all(args.out_dir)
        .map_err(|e| (1, format!("cannot create {}: {e}", args.out_dir.display())))?;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(args.workers.unwrap_or(0)) // 0 = rayon default
        .build()
        .map_err(|e| (1, format!("worker pool: {e}")))?;

    let mut jobs: Vec<(&'static str, u64)> = Vec::new();
    for method in experiment.method_names() {
        for &seed in &experiment.train.seeds {
            jobs.push((method, seed));
        }
    }

    let outputs: Vec<Result<RunOutput, Error>> = pool.install(|| {
        jobs.par_iter()
            .map(|&(method, seed)| run_one(&experiment, method, seed, theory.as_ref()))
            .collect()
    });

    let mut runs = Vec::with_capacity(outputs.len());
    for out in outputs {
        match out {
            Ok(run) => runs.push(run),
            Err(e) => return Err((exit_code_for(&e), e.to_string())),
        }
    }

    let config_echo = serde_json::to_string(&experiment.config)
        .expect("config serializes");
    for run in &runs {
        let path = args
            .out_dir
            .join(format!("{}_seed{}.csv", run.method, run.seed));
        let csv = render_csv(run, &config_echo);
        fs::write(&path, csv).map_err(|e| (1, format!("write {}: {e}", path.display())))?;
        eprintln!("wrote {}", path.display());
    }

    let summary = summarize(&experiment, &runs);
    let path = args.out_dir.join("summary.json");
    let mut file =
        fs::File::create(&path).map_err(|e| (1, format!("write {}: {e}", path.display())))?;
    serde_json::to_writer_pretty(&mut file, &summary)
        .map_err(|e| (1, format!("serialize summary: {e}")))?;
    file.write_all(b"\n").ok();
    eprintln!("wrote {}", path.display());
    Ok(())
}

/// ZIM theory constants apply when the objective declares L, the lattice
/// step is 1, and gradients are full-batch.
fn theory_constants(experiment: &Experiment) -> Option<zimopt::TheoryConstants> {
    let zim = experiment.zim.as_ref()?;
    if zim.delta != 1.0 || experiment.train.batch_size.is_some() {
        return None;
    }
    let consts = experiment.objective.constants()?;
    let mut out = zim_constants(zim.n, zim.c, experiment.objective.dim(), consts.l);
    if let Some(f_inf) = consts.f_inf {
        out = out.with_f_inf(f_inf);
    }
    Some(out)
}

fn run_one(
    experiment: &Experiment,
    method_name: &'static str,
    seed: u64,
    theory: Option<&zimopt::TheoryConstants>,
) -> Result<RunOutput, Error> {
    let w1 = experiment.initial_weights(seed);
    let method = match method_name {
        "zim" => Method::Zim(experiment.zim.expect("resolved")),
        _ => Method::Sgd {
            lr: experiment.sgd_lr.expect("resolved"),
        },
    };
    let trace = train(
        experiment.objective.as_ref(),
        &method,
        &experiment.train,
        &w1,
        seed,
    )?;

    let test_accuracy = experiment.test_set.as_ref().and_then(|test| {
        experiment
            .objective
            .eval_accuracy_on(&trace.final_weights, test)
    });

    let bound = match (&method, theory) {
        (Method::Zim(zim), Some(consts)) => {
            let f_w1 = experiment.objective.value(&w1);
            let f_inf = consts.f_inf.expect("set when constants are known");
            Some(evaluate_bound(&trace, zim, consts, f_w1, f_inf)?)
        }
        _ => None,
    };

    Ok(RunOutput {
        method: method_name,
        seed,
        trace,
        test_accuracy,
        bound,
    })
}

/// CSV layout: a `#`-prefixed preamble carrying the config echo and run
/// identity, a fixed header row, then one row per logged step. The accuracy
/// column is empty for objectives that have none.
fn render_csv(run: &RunOutput, config_echo: &str) -> String {
    let mut out = String::new();
    out.push_str(&format!("# config = {config_echo}\n"));
    out.push_str(&format!("# method = {}\n", run.method));
    out.push_str(&format!("# seed = {}\n", run.seed));
    if let Some(k) = run.trace.stagnated_at {
        out.push_str(&format!("# stagnated_at = {k}\n"));
    }
    out.push_str("k,objective,grad_sq_norm,running_mean_grad_sq,update_l1,accuracy\n");
    for r in &run.trace.records {
        let accuracy = r
            .accuracy
            .map(|a| a.to_string())
            .unwrap_or_default();
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.k, r.objective, r.grad_sq_norm, r.running_mean_grad_sq, r.update_l1, accuracy
        ));
    }
    out
}

#[derive(Serialize)]
struct Summary<'a> {
    config: &'a ExperimentConfig,
    resolved_steps: u64,
    steps_per_epoch: Option<u64>,
    objective_dim: usize,
    methods: Vec<MethodSummary>,
}

#[derive(Serialize)]
struct MethodSummary {
    method: String,
    seeds: Vec<u64>,
    steps: Vec<u64>,
    objective: Band,
    grad_sq_norm: Band,
    running_mean_grad_sq: Band,
    update_l1: Band,
    accuracy: Option<Band>,
    final_test_accuracy: Option<PerSeed>,
    stagnated_seeds: Vec<u64>,
    bound: Option<BoundSummary>,
}

/// Mean and sample standard deviation across seeds, per logged step.
#[derive(Serialize)]
struct Band {
    mean: Vec<f64>,
    std: Vec<f64>,
}

#[derive(Serialize)]
struct PerSeed {
    per_seed: Vec<f64>,
    mean: f64,
    std: f64,
}

#[derive(Serialize)]
struct BoundSummary {
    transient: f64,
    floor: f64,
    total: f64,
    observed_per_seed: Vec<f64>,
    observed_mean: f64,
    satisfied_per_seed: Vec<bool>,
    satisfied_in_mean: bool,
}

fn summarize<'a>(experiment: &'a Experiment, runs: &[RunOutput]) -> Summary<'a> {
    let methods = experiment
        .method_names()
        .into_iter()
        .map(|name| {
            let of_method: Vec<&RunOutput> =
                runs.iter().filter(|r| r.method == name).collect();
            summarize_method(name, &of_method)
        })
        .collect();
    Summary {
        config: &experiment.config,
        resolved_steps: experiment.train.total_steps,
        steps_per_epoch: experiment.steps_per_epoch,
        objective_dim: experiment.objective.dim(),
        methods,
    }
}

fn summarize_method(name: &str, runs: &[&RunOutput]) -> MethodSummary {
    let steps: Vec<u64> = runs[0].trace.records.iter().map(|r| r.k).collect();
    for run in runs {
        assert_eq!(
            run.trace.records.len(),
            steps.len(),
            "seeds disagree on the logging cadence"
        );
    }
    let band = |field: &dyn Fn(&StepRecord) -> f64| -> Band {
        let mut mean = Vec::with_capacity(steps.len());
        let mut std = Vec::with_capacity(steps.len());
        for i in 0..steps.len() {
            let values: Vec<f64> = runs.iter().map(|r| field(&r.trace.records[i])).collect();
            let (m, s) = mean_std(&values);
            mean.push(m);
            std.push(s);
        }
        Band { mean, std }
    };

    let objective = band(&|r: &StepRecord| r.objective);
    let grad_sq_norm = band(&|r: &StepRecord| r.grad_sq_norm);
    let running_mean_grad_sq = band(&|r: &StepRecord| r.running_mean_grad_sq);
    let update_l1 = band(&|r: &StepRecord| r.update_l1);
    let has_accuracy = runs
        .iter()
        .all(|r| r.trace.records.iter().all(|rec| rec.accuracy.is_some()));
    let accuracy = has_accuracy.then(|| band(&|r: &StepRecord| r.accuracy.unwrap()));

    let final_test_accuracy = runs.iter().all(|r| r.test_accuracy.is_some()).then(|| {
        let per_seed: Vec<f64> = runs.iter().map(|r| r.test_accuracy.unwrap()).collect();
        let (mean, std) = mean_std(&per_seed);
        PerSeed {
            per_seed,
            mean,
            std,
        }
    });

    let bound = runs.iter().all(|r| r.bound.is_some()).then(|| {
        let reports: Vec<&BoundReport> = runs.iter().map(|r| r.bound.as_ref().unwrap()).collect();
        let observed_per_seed: Vec<f64> = reports.iter().map(|b| b.observed).collect();
        let (observed_mean, _) = mean_std(&observed_per_seed);
        let total = reports[0].total;
        BoundSummary {
            transient: reports[0].transient,
            floor: reports[0].floor,
            total,
            observed_per_seed,
            observed_mean,
            satisfied_per_seed: reports.iter().map(|b| b.satisfied).collect(),
            satisfied_in_mean: observed_mean <= total,
        }
    });

    MethodSummary {
        method: name.to_string(),
        seeds: runs.iter().map(|r| r.seed).collect(),
        steps,
        objective,
        grad_sq_norm,
        running_mean_grad_sq,
        update_l1,
        accuracy,
        final_test_accuracy,
        stagnated_seeds: runs
            .iter()
            .filter(|r| r.trace.stagnated_at.is_some())
            .map(|r| r.seed)
            .collect(),
        bound,
    }
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}
