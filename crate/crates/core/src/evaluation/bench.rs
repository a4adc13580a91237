use std::io::Write;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::domain::DomainSampleSet;
use crate::error::{Error, Result};
use crate::kernels::KernelSpec;
use crate::metric::{emmd_states_with_gradient, ProjectionMap};
use crate::points::PointSet;

/// Bandwidth used for the timing runs; timing does not depend on it.
pub const BENCH_BANDWIDTH: f64 = 0.2;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub dim: usize,
    #[serde(rename = "T")]
    pub horizon: usize,
    #[serde(rename = "M")]
    pub samples: usize,
    pub median_seconds: f64,
    pub iqr_seconds: f64,
}

/// Linear-interpolated quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Times one E-MMD value-and-gradient evaluation per configuration on
/// uniformly random states and samples in the unit cube.
///
/// Runs on a single-thread pool so timings do not depend on core count.
/// Rows come out in nested order: dims, then horizons, then sample counts.
pub fn scaling_benchmark(
    dims: &[usize],
    horizons: &[usize],
    sample_counts: &[usize],
    repeats: usize,
    seed: u64,
) -> Result<Vec<BenchRow>> {
    if [dims, horizons, sample_counts].iter().any(|l| l.is_empty() || l.contains(&0)) || repeats == 0 {
        return Err(Error::invalid("benchmark lists must be non-empty with entries >= 1, and repeats >= 1"));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .map_err(|e| Error::invalid(format!("cannot build benchmark thread pool: {e}")))?;
    let spec = KernelSpec::rbf(BENCH_BANDWIDTH)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::new();
    for &dim in dims {
        for &horizon in horizons {
            for &m in sample_counts {
                let states: Vec<f64> = (0..horizon * dim).map(|_| rng.random()).collect();
                let coords: Vec<f64> = (0..m * dim).map(|_| rng.random()).collect();
                let samples = DomainSampleSet::new(PointSet::euclidean(dim, coords)?)?;
                let mut times = Vec::with_capacity(repeats);
                for _ in 0..repeats {
                    let start = Instant::now();
                    let out = pool.install(|| {
                        emmd_states_with_gradient(&states, dim, &samples, &spec, &ProjectionMap::Identity)
                    })?;
                    times.push(start.elapsed().as_secs_f64());
                    std::hint::black_box(out);
                }
                times.sort_by(f64::total_cmp);
                rows.push(BenchRow {
                    dim,
                    horizon,
                    samples: m,
                    median_seconds: quantile(&times, 0.5),
                    iqr_seconds: quantile(&times, 0.75) - quantile(&times, 0.25),
                });
            }
        }
    }
    Ok(rows)
}

/// Writes rows as CSV with header `dim,T,M,median_seconds,iqr_seconds`.
pub fn write_bench_csv<W: Write>(rows: &[BenchRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn log_log_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_shape_and_csv() {
        let rows = scaling_benchmark(&[2, 3], &[4, 8], &[5], 3, 0).unwrap();
        assert_eq!(rows.len(), 4);
        assert!(rows.iter().all(|r| r.median_seconds > 0.0 && r.iqr_seconds >= 0.0));
        assert_eq!((rows[1].dim, rows[1].horizon, rows[1].samples), (2, 8, 5));
        let mut buf = Vec::new();
        write_bench_csv(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("dim,T,M,median_seconds,iqr_seconds\n"));
        assert_eq!(text.lines().count(), 5);
        assert!(scaling_benchmark(&[2], &[0], &[5], 1, 0).is_err());
        assert!(scaling_benchmark(&[2], &[4], &[5], 0, 0).is_err());
    }

    #[test]
    fn quantiles_and_slopes() {
        let v = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(quantile(&v, 0.5), 3.0);
        assert_eq!(quantile(&v, 0.25), 2.0);
        assert_eq!(quantile(&[1.0, 2.0], 0.5), 1.5);
        let x = [1.0, 2.0, 4.0, 8.0];
        let y: Vec<f64> = x.iter().map(|v: &f64| 3.0 * v * v).collect();
        assert!((log_log_slope(&x, &y) - 2.0).abs() < 1e-12);
    }
}
