use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metric::ProjectionMap;
use crate::points::PointSet;
use crate::trajectory::Trajectory;

/// Summary of one optimized trajectory.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub coverage_percent: f64,
    pub coverage_radius: f64,
    pub emmd_initial: f64,
    pub emmd_final: f64,
    /// `emmd_final` plus the sample-only term: the squared MMD.
    pub mmd_squared: f64,
    /// Length of the projected path (domain units).
    pub trajectory_length: f64,
    pub wall_time: f64,
}

/// Percentage of samples within `radius` of some trajectory point, on positions.
pub fn coverage_percent_points(points: &PointSet, samples: &PointSet, radius: f64) -> Result<f64> {
    if !(radius > 0.0) {
        return Err(Error::invalid(format!("coverage radius must be positive, got {radius}")));
    }
    if points.is_empty() || samples.is_empty() {
        return Err(Error::invalid("coverage needs trajectory points and samples"));
    }
    let path = points.positions();
    let r2 = radius * radius;
    let covered = (0..samples.len())
        .filter(|&j| {
            let s = samples.position(j);
            path.iter().any(|p| (p - s).norm_squared() <= r2)
        })
        .count();
    Ok(100.0 * covered as f64 / samples.len() as f64)
}

/// Percentage of samples within `radius` of the projected trajectory.
pub fn coverage_percent(traj: &Trajectory, samples: &PointSet, radius: f64, g: &ProjectionMap) -> Result<f64> {
    coverage_percent_points(&g.project_all(&traj.states, traj.state_dim)?, samples, radius)
}

/// Sum of distances between consecutive positions.
pub fn path_length(points: &PointSet) -> f64 {
    let p: Vec<Vector3<f64>> = points.positions();
    p.windows(2).map(|w| (w[1] - w[0]).norm()).sum()
}

pub fn trajectory_length(traj: &Trajectory, g: &ProjectionMap) -> Result<f64> {
    Ok(path_length(&g.project_all(&traj.states, traj.state_dim)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn corners() -> PointSet {
        PointSet::from_rows(&[[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]]).unwrap()
    }

    #[test]
    fn examples() {
        let s = corners();
        assert_eq!(coverage_percent_points(&s, &s, 1e-9).unwrap(), 100.0);
        let one = PointSet::from_rows(&[[0.0, 0.0]]).unwrap();
        assert_eq!(coverage_percent_points(&one, &s, 0.1).unwrap(), 25.0);
        let off = PointSet::from_rows(&[[0.5, 0.5]]).unwrap();
        assert_eq!(coverage_percent_points(&off, &s, 1e-12).unwrap(), 0.0);
        assert!(coverage_percent_points(&off, &s, 0.0).is_err());
        let traj = Trajectory::new(2, 2, 0.1, vec![0.0, 0.0, 1.0, 1.0], vec![0.0; 4]).unwrap();
        assert_eq!(coverage_percent(&traj, &s, 0.1, &ProjectionMap::Identity).unwrap(), 50.0);
        assert!((trajectory_length(&traj, &ProjectionMap::Identity).unwrap() - 2f64.sqrt()).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn monotone_in_radius_and_length(
            pts in prop::collection::vec((0.0f64..1.0, 0.0f64..1.0), 1..10),
            extra in prop::collection::vec((0.0f64..1.0, 0.0f64..1.0), 0..5),
            r in 0.01f64..0.5,
            dr in 0.0f64..0.5,
        ) {
            let samples = PointSet::from_rows(&(0..40).map(|i| [(i % 7) as f64 / 7.0, (i / 7) as f64 / 6.0]).collect::<Vec<_>>()).unwrap();
            let rows: Vec<[f64; 2]> = pts.iter().map(|&(a, b)| [a, b]).collect();
            let path = PointSet::from_rows(&rows).unwrap();
            let small = coverage_percent_points(&path, &samples, r).unwrap();
            let big = coverage_percent_points(&path, &samples, r + dr).unwrap();
            prop_assert!(small <= big);
            let mut longer = rows.clone();
            longer.extend(extra.iter().map(|&(a, b)| [a, b]));
            let longer = coverage_percent_points(&PointSet::from_rows(&longer).unwrap(), &samples, r).unwrap();
            prop_assert!(small <= longer);
            prop_assert!((0.0..=100.0).contains(&small));
        }
    }
}
