//! Command-line runner for simulation-based calibration campaigns.

mod config;
mod manifest;
mod plot;
mod report;
mod runner;

use clap::{Parser, Subcommand};
use std::path::PathBuf;

#[derive(Parser)]
#[command(
    name = "sbc",
    version,
    about = "Simulation-based calibration checking for Bayesian inference",
    long_about = "Runs prior- and posterior-mode calibration campaigns, tests rank uniformity \
                  against simultaneous confidence bands, and renders PIT-ECDF difference plots."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a campaign described by a JSON config file.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Worker threads for SBC iterations (0 = automatic).
        #[arg(long)]
        workers: Option<usize>,
        /// Override the config's campaign seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Reuse iteration records from a previous run of the same config.
        #[arg(long)]
        resume: bool,
        /// Stop after computing this many new iterations (smoke runs; finish
        /// later with --resume).
        #[arg(long)]
        limit_iterations: Option<usize>,
    },
    /// Re-render the PIT-ECDF difference plots of a run directory.
    Plot {
        #[arg(long)]
        run_dir: PathBuf,
    },
    /// Summarize a completed or partial run directory.
    Report {
        #[arg(long)]
        run_dir: PathBuf,
    },
    /// Calibrate a simultaneous confidence band and print or save it.
    CalibrateBand {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        s: usize,
        #[arg(long, default_value_t = 0.95)]
        coverage: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() {
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Run { config, workers, seed, resume, limit_iterations } => {
            runner::cmd_run(&runner::RunArgs {
                config_path: config,
                workers,
                seed,
                resume,
                limit_iterations,
            })
        }
        Command::Plot { run_dir } => runner::cmd_plot(&run_dir),
        Command::Report { run_dir } => runner::cmd_report(&run_dir),
        Command::CalibrateBand { n, s, coverage, seed, out } => {
            runner::cmd_calibrate_band(n, s, coverage, seed, out.as_deref())
        }
    };
    std::process::exit(code);
}
