//! `ema`: batch driver for simulations, classification, phase-diagram sweeps
//! and self-validation.
//!
//! Exit codes: 0 regular, 1 configuration or IO error (one JSON line on
//! stderr), 2 singularity detected by `simulate`, 3 a `validate` suite failed.

mod commands;
mod config;
mod error;
mod validate;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::commands::{EXIT_OK, EXIT_VALIDATION_FAILED};
use crate::error::CliError;

#[derive(Parser)]
#[command(name = "ema", version, about = "Radial Euler-Monge-Ampere toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct Common {
    /// Run-config TOML file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override one config key, e.g. `--set profile.params.d=-1.2`. Repeatable.
    #[arg(long = "set", value_name = "K=V", global = true)]
    set: Vec<String>,
    /// Directory for output files.
    #[arg(long, default_value = ".", global = true)]
    out: PathBuf,
    /// Worker threads; defaults to the number of cores.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Seed for sampled points; overrides the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Evolve a profile with the characteristic ensemble.
    Simulate,
    /// Classify a profile against the critical threshold.
    Classify,
    /// Evaluate verdicts over a parameter grid.
    Sweep,
    /// Run the self-check suites.
    Validate,
}

fn execute(cli: &Cli) -> Result<i32, CliError> {
    if let Some(threads) = cli.common.threads {
        if threads == 0 {
            return Err(CliError::Config("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    }
    let cfg = config::load(cli.common.config.as_deref(), &cli.common.set, cli.common.seed)?;
    let out = &cli.common.out;
    match cli.command {
        Command::Simulate => commands::simulate(&cfg, out),
        Command::Classify => commands::classify(&cfg, out),
        Command::Sweep => commands::sweep(&cfg, out),
        Command::Validate => {
            let report = validate::run(&cfg)?;
            let json = commands::to_json(&report);
            commands::write_file(out, "report.json", &json)?;
            for s in &report.suites {
                eprintln!("{} {}", if s.passed { "PASS" } else { "FAIL" }, s.name);
            }
            Ok(if report.passed { EXIT_OK } else { EXIT_VALIDATION_FAILED })
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(1)
        }
    }
}
