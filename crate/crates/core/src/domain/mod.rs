//! Domain samples: the only description of the search domain the metric needs.

mod csvio;
mod mesh;
mod sampling;

pub use csvio::{read_samples_csv, write_samples_csv, SAMPLE_CSV_COLUMNS};
pub use mesh::{load_mesh, parse_obj, TriangleMesh};
pub use sampling::{
    importance_filter, normal_alignment_scores, offset_along_normals, sample_density_2d,
    sample_surface_uniform, Bounds2, GaussianComponent, GaussianMixture, MAX_DENSITY_PROPOSALS,
    MIN_ACCEPTANCE_RATE,
};

use nalgebra::Vector3;

use crate::error::{Error, Result};
use crate::lie::Pose;
use crate::points::PointSet;

/// `M` points drawn from the utility measure, with optional normals and weights.
///
/// Samples count uniformly unless `weights` is set. The sampling pipeline
/// expresses importance by resampling (see [`importance_filter`]), so its
/// output stays unweighted.
#[derive(Clone, Debug, PartialEq)]
pub struct DomainSampleSet {
    pub points: PointSet,
    pub normals: Option<Vec<Vector3<f64>>>,
    pub weights: Option<Vec<f64>>,
}

impl DomainSampleSet {
    pub fn new(points: PointSet) -> Result<Self> {
        let s = Self {
            points,
            normals: None,
            weights: None,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn with_normals(points: PointSet, normals: Vec<Vector3<f64>>) -> Result<Self> {
        let s = Self {
            points,
            normals: Some(normals),
            weights: None,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        let m = self.points.len();
        if m == 0 {
            return Err(Error::DegenerateDomain("sample set is empty".into()));
        }
        if !self.points.is_finite() {
            return Err(Error::invalid("sample set contains non-finite points"));
        }
        if let Some(n) = &self.normals {
            if n.len() != m {
                return Err(Error::DimensionMismatch {
                    expected: m,
                    found: n.len(),
                });
            }
            if let Some(bad) = n.iter().position(|v| (v.norm() - 1.0).abs() > 1e-9) {
                return Err(Error::invalid(format!("normal {bad} is not unit length")));
            }
        }
        if let Some(w) = &self.weights {
            if w.len() != m {
                return Err(Error::DimensionMismatch {
                    expected: m,
                    found: w.len(),
                });
            }
            if w.iter().any(|x| !(*x >= 0.0 && x.is_finite())) {
                return Err(Error::invalid("sample weights must be nonnegative"));
            }
            let sum: f64 = w.iter().sum();
            if (sum - 1.0).abs() > 1e-12 {
                return Err(Error::invalid(format!("sample weights sum to {sum}, not 1")));
            }
        }
        Ok(())
    }

    /// Sample centroid in position space (poses contribute their translation).
    pub fn centroid(&self) -> Vector3<f64> {
        let m = self.len() as f64;
        self.points.positions().iter().sum::<Vector3<f64>>() / m
    }

    /// Converts 3D points with normals into tool poses facing the surface.
    pub fn to_facing_poses(&self) -> Result<DomainSampleSet> {
        let normals = self
            .normals
            .as_ref()
            .ok_or_else(|| Error::invalid("pose samples need normals"))?;
        let poses = (0..self.len())
            .map(|i| Pose::facing(self.points.position(i), normals[i]))
            .collect();
        Ok(DomainSampleSet {
            points: PointSet::Poses(poses),
            normals: self.normals.clone(),
            weights: self.weights.clone(),
        })
    }

    /// Keeps only the first `dims` coordinates of Euclidean points.
    pub fn truncate_dims(&self, dims: usize) -> Result<DomainSampleSet> {
        match &self.points {
            PointSet::Euclidean { dim, coords } if dims >= 1 && dims <= *dim => {
                let coords = coords
                    .chunks(*dim)
                    .flat_map(|c| c[..dims].iter().copied())
                    .collect();
                Ok(DomainSampleSet {
                    points: PointSet::euclidean(dims, coords)?,
                    normals: self.normals.clone(),
                    weights: self.weights.clone(),
                })
            }
            _ => Err(Error::invalid(format!("cannot truncate samples to {dims} dimensions"))),
        }
    }
}
