//! Ergodic trajectory optimization with the kernel maximum mean discrepancy.
//!
//! The ergodic metric compares the time-averaged statistics of a trajectory
//! against samples drawn from a utility measure over the search domain. Only
//! samples of the domain are required, so the same machinery covers planar
//! utility maps, mesh surfaces, configuration spaces and SE(3).

pub mod domain;
pub mod error;
pub mod evaluation;
pub mod kernels;
pub mod lie;
pub mod metric;
pub mod optimizer;
pub mod points;
pub mod systems;
pub mod trajectory;

pub use error::{Error, Result};
pub use kernels::{bandwidth_median_heuristic, KernelFamily, KernelSpec};
pub use lie::{se3_exp, se3_log, weighted_tangent_norm_sq, Pose, TangentWeight, Twist};
pub use points::{PointRef, PointSet};
pub use trajectory::Trajectory;
