//! `spinbm`: config-driven simulation, stationary estimation and verification
//! of spinning Brownian motion.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::{Failure, Options};

#[derive(Parser)]
#[command(name = "spinbm", version, about = "Spinning Brownian motion simulation and verification")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Run configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Directory for CSV artifacts and reports.
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,

    /// Replace `[sim] seed`.
    #[arg(long, global = true)]
    seed_override: Option<u64>,

    /// Replace `[sim] chains`.
    #[arg(long, global = true)]
    chains: Option<usize>,

    /// Do not print the report to stdout.
    #[arg(long, global = true)]
    quiet: bool,

    /// Worker threads for chain parallelism (default: all cores).
    #[arg(long, global = true, env = "SPINBM_WORKERS")]
    workers: Option<usize>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Simulate chains and write one trajectory CSV per chain plus summary.txt.
    Simulate,
    /// Estimate the stationary occupation histogram and compare with known laws.
    EstimateStationary,
    /// Run the deterministic verification checks.
    Verify,
}

const EXIT_CHECK_FAILED: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_RUNTIME: u8 = 3;

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.workers {
        if n == 0 {
            eprintln!("error: worker count must be at least 1");
            return ExitCode::from(EXIT_CONFIG);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot start {n} workers: {e}");
            return ExitCode::from(EXIT_RUNTIME);
        }
    }
    let Some(path) = cli.config.as_deref() else {
        eprintln!("error: --config is required");
        return ExitCode::from(EXIT_CONFIG);
    };
    let cfg = match commands::read_config(path) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    let opts = Options {
        out_dir: cli.out_dir,
        seed_override: cli.seed_override,
        chains: cli.chains,
    };
    let result = match cli.command {
        Command::Simulate => commands::simulate(cfg, &opts),
        Command::EstimateStationary => commands::estimate_stationary(cfg, &opts),
        Command::Verify => commands::verify(cfg, &opts),
    };
    match result {
        Ok(report) => {
            if !cli.quiet {
                print!("{}", report.text());
            }
            if report.passed() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(EXIT_CHECK_FAILED)
            }
        }
        Err(Failure::Config(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_CONFIG)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_RUNTIME)
        }
    }
}
