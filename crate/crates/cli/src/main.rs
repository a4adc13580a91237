use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

/// Ergodic trajectory optimization with the kernel MMD metric.
#[derive(Parser)]
#[command(name = "ergmmd", version)]
struct Cli {
    /// Repeat for more detail.
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Optimize a scenario and write trajectory.csv, report.json and plot.svg.
    Run {
        config: PathBuf,
        /// Overrides the config seed and ERGMMD_SEED.
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides `output.directory`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Time the metric and its gradient over a grid of sizes.
    Bench {
        #[arg(long, value_delimiter = ',', default_value = "2")]
        dims: Vec<usize>,
        #[arg(long, value_delimiter = ',', default_value = "64,128,256")]
        horizons: Vec<usize>,
        #[arg(long, value_delimiter = ',', default_value = "64,128,256")]
        samples: Vec<usize>,
        #[arg(long, default_value_t = 5)]
        repeats: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "bench.csv")]
        out: PathBuf,
    },
    /// Write the scenario's domain samples as CSV.
    Samples {
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "samples.csv")]
        out: PathBuf,
    },
}

fn seed_override(flag: Option<u64>) -> Result<Option<u64>> {
    if flag.is_some() {
        return Ok(flag);
    }
    match std::env::var("ERGMMD_SEED") {
        Ok(v) => Ok(Some(v.trim().parse().with_context(|| format!("ERGMMD_SEED: not an integer: {v}"))?)),
        Err(_) => Ok(None),
    }
}

fn execute(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Run { config, seed, out } => {
            let outcome = ergmmd_cli::run_scenario(&config, seed_override(seed)?, out.as_deref())?;
            let r = &outcome.report;
            println!(
                "{}: coverage {:.1}% (radius {:.3}), mmd^2 {:.4e}, {:?}",
                outcome.out_dir.display(),
                r.coverage.coverage_percent,
                r.coverage.coverage_radius,
                r.coverage.mmd_squared,
                r.status
            );
            Ok(r.converged)
        }
        Command::Bench {
            dims,
            horizons,
            samples,
            repeats,
            seed,
            out,
        } => {
            let rows = ergmmd_cli::run_bench(&dims, &horizons, &samples, repeats, seed, &out)?;
            println!("{}: {} rows", out.display(), rows.len());
            Ok(true)
        }
        Command::Samples { config, seed, out } => {
            let s = ergmmd_cli::export_samples(&config, seed_override(seed)?, &out)?;
            println!("{}: {} samples", out.display(), s.len());
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match execute(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
