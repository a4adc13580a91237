//! Coverage reporting, baseline planners, and timing benchmarks.

mod baselines;
mod bench;
mod coverage;

pub use baselines::{greedy_mmd_controller, tour_length, tsp_nearest_neighbor, GREEDY_LEVELS};
pub use bench::{log_log_slope, scaling_benchmark, write_bench_csv, BenchRow, BENCH_BANDWIDTH};
pub use coverage::{coverage_percent, coverage_percent_points, path_length, trajectory_length, CoverageReport};

use crate::error::Result;
use crate::kernels::KernelSpec;
use crate::metric::{sample_constant_term, ProjectionMap};
use crate::optimizer::ProblemSpec;
use crate::trajectory::Trajectory;

/// Multiple of the kernel bandwidth used as the coverage radius.
pub const COVERAGE_RADIUS_FACTOR: f64 = 2.0;

/// Coverage radius for a kernel: twice its (nominal) bandwidth.
pub fn default_coverage_radius(spec: &KernelSpec) -> f64 {
    COVERAGE_RADIUS_FACTOR * spec.bandwidth
}

/// Builds the report for `traj`, optimized from `initial`.
pub fn coverage_report(
    problem: &ProblemSpec,
    initial: &Trajectory,
    traj: &Trajectory,
    radius: f64,
    wall_time: f64,
) -> Result<CoverageReport> {
    let g: &ProjectionMap = &problem.projection;
    let emmd_final = problem.emmd(traj)?;
    Ok(CoverageReport {
        coverage_percent: coverage_percent(traj, &problem.samples.points, radius, g)?,
        coverage_radius: radius,
        emmd_initial: problem.emmd(initial)?,
        emmd_final,
        mmd_squared: emmd_final + sample_constant_term(&problem.samples, &problem.kernel)?,
        trajectory_length: trajectory_length(traj, g)?,
        wall_time,
    })
}
