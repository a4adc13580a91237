//! Scenario files, orchestration and artifacts for `ergmmd`.

pub mod config;
pub mod plot;
pub mod scenario;

pub use config::ScenarioConfig;
pub use scenario::{export_samples, run_scenario, RunOutcome, RunReport, Scenario};

use std::path::Path;

use anyhow::{Context, Result};
use ergmmd::evaluation::{scaling_benchmark, write_bench_csv, BenchRow};

/// Times the metric over the grid and writes `dim,T,M,median_seconds,iqr_seconds`.
pub fn run_bench(
    dims: &[usize],
    horizons: &[usize],
    sample_counts: &[usize],
    repeats: usize,
    seed: u64,
    out: &Path,
) -> Result<Vec<BenchRow>> {
    let rows = scaling_benchmark(dims, horizons, sample_counts, repeats, seed)?;
    let file = std::fs::File::create(out).with_context(|| format!("cannot write {}", out.display()))?;
    write_bench_csv(&rows, file).with_context(|| format!("cannot write {}", out.display()))?;
    Ok(rows)
}
