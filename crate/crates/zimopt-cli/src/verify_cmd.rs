//! `zimopt verify`: the moment Monte Carlo grid, exhaustive enumeration,
//! inequality sweeps, and descent-lemma checks, with a JSON report and a
//! nonzero exit status on any proven-statement failure.

use std::fs;
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;

use zimopt::verify::{
    descent_lemma_sweep, dot_bound_sweep, enumeration_equivalence, moment_bound_sweep,
    moment_tasks, run_moment_task, wasted_mass_documentation, VerifyLevel, VerifyReport,
};

pub struct VerifyArgs<'a> {
    pub level: VerifyLevel,
    pub out: Option<&'a Path>,
    pub workers: Option<usize>,
    pub seed: u64,
}

pub fn run(args: &VerifyArgs) -> Result<(), (i32, String)> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(args.workers.unwrap_or(0))
        .build()
        .map_err(|e| (1, format!("worker pool: {e}")))?;

    let tasks = moment_tasks(args.level, args.seed);
    eprintln!(
        "running {} moment checks at level {:?} ...",
        tasks.len(),
        args.level
    );
    let mut checks: Vec<_> = pool.install(|| {
        tasks
            .par_iter()
            .map(run_moment_task)
            .collect()
    });

    let (max_n, max_d) = match args.level {
        VerifyLevel::Quick => (3, 2),
        VerifyLevel::Full => (4, 3),
    };
    checks.push(enumeration_equivalence(max_n, max_d, 1e-12));
    checks.push(wasted_mass_documentation());
    checks.push(dot_bound_sweep(args.level, args.seed ^ 0xd07));
    checks.push(moment_bound_sweep(args.level, args.seed ^ 0x202));
    let (points, samples) = match args.level {
        VerifyLevel::Quick => (10, 20_000),
        VerifyLevel::Full => (100, 100_000),
    };
    checks.push(descent_lemma_sweep(points, samples, args.seed ^ 0xde5));

    let report = VerifyReport {
        level: args.level,
        checks,
    };

    let passed = report.checks.iter().filter(|c| c.passed).count();
    println!(
        "verify: {}/{} checks passed, {} hard failures",
        passed,
        report.checks.len(),
        report.hard_failures()
    );
    for check in &report.checks {
        if !check.passed {
            println!(
                "  {} {}: {}",
                if check.hard { "FAILED" } else { "noted " },
                check.name,
                check.detail
            );
        }
    }

    if let Some(path) = args.out {
        let mut file = fs::File::create(path)
            .map_err(|e| (1, format!("write {}: {e}", path.display())))?;
        serde_json::to_writer_pretty(&mut file, &report)
            .map_err(|e| (1, format!("serialize report: {e}")))?;
        file.write_all(b"\n").ok();
        eprintln!("wrote {}", path.display());
    }

    if report.passed() {
        Ok(())
    } else {
        Err((2, format!("{} hard checks failed", report.hard_failures())))
    }
}
