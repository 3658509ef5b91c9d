//! Command-line front end: seeded experiments from config files, the
//! verification suite, and the theory-constant calculator.
//!
//! Exit codes: 0 success, 1 configuration error, 2 verification failure,
//! 3 runtime numeric failure.

mod bounds_cmd;
mod config;
mod train_cmd;
mod verify_cmd;

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use zimopt::verify::VerifyLevel;

#[derive(Parser)]
#[command(name = "zimopt", version, about = "Discrete-update training and verification")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a seeded experiment described by a TOML config file.
    Train {
        /// Path to the experiment config.
        #[arg(long)]
        config: PathBuf,
        /// Output directory for per-seed CSV traces and summary.json.
        #[arg(long)]
        out: PathBuf,
        /// Worker threads for parallel seeds (default: all cores).
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Run the sampler/theory verification suite.
    Verify {
        #[arg(long, value_enum, default_value_t = LevelArg::Quick)]
        level: LevelArg,
        /// Write the JSON report here.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        workers: Option<usize>,
        /// Master seed for the randomized sweeps.
        #[arg(long, default_value_t = 20_260_809)]
        seed: u64,
    },
    /// Print the update-bound constants and floor comparison.
    Bounds {
        /// Gradient Lipschitz constant L.
        #[arg(long)]
        l: f64,
        /// Parameter dimension d.
        #[arg(long)]
        d: usize,
        /// Smoothing constant c.
        #[arg(long)]
        c: f64,
        /// Trial count n (the floor itself does not depend on it).
        #[arg(long, default_value_t = 1)]
        n: u64,
        /// Initial objective gap F(w1) - F_inf for the transient term.
        #[arg(long)]
        gap: Option<f64>,
        /// Horizon K for the transient term.
        #[arg(long)]
        steps: Option<u64>,
        /// Fixed learning rate (defaults to the largest admissible).
        #[arg(long)]
        alpha: Option<f64>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum LevelArg {
    Quick,
    Full,
}

impl From<LevelArg> for VerifyLevel {
    fn from(level: LevelArg) -> Self {
        match level {
            LevelArg::Quick => VerifyLevel::Quick,
            LevelArg::Full => VerifyLevel::Full,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Train {
            config,
            out,
            workers,
        } => {
            let text = match fs::read_to_string(&config) {
                Ok(text) => text,
                Err(e) => {
                    eprintln!("error: cannot read {}: {e}", config.display());
                    return ExitCode::from(1);
                }
            };
            train_cmd::run(&train_cmd::TrainArgs {
                config_text: &text,
                out_dir: &out,
                workers,
            })
        }
        Command::Verify {
            level,
            out,
            workers,
            seed,
        } => verify_cmd::run(&verify_cmd::VerifyArgs {
            level: level.into(),
            out: out.as_deref(),
            workers,
            seed,
        }),
        Command::Bounds {
            l,
            d,
            c,
            n,
            gap,
            steps,
            alpha,
        } => bounds_cmd::run(&bounds_cmd::BoundsArgs {
            l,
            d,
            c,
            n,
            gap,
            steps,
            alpha,
        }),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err((code, message)) => {
            eprintln!("error: {message}");
            ExitCode::from(code as u8)
        }
    }
}
