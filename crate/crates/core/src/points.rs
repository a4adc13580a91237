//! Point collections living in a kernel's domain: Euclidean vectors or poses.

use nalgebra::Vector3;

use crate::error::{Error, Result};
use crate::lie::Pose;

#[derive(Clone, Debug, PartialEq)]
pub enum PointSet {
    /// Row-major `len x dim` coordinates.
    Euclidean { dim: usize, coords: Vec<f64> },
    Poses(Vec<Pose>),
}

#[derive(Clone, Copy, Debug)]
pub enum PointRef<'a> {
    Euclidean(&'a [f64]),
    Pose(&'a Pose),
}

impl PointSet {
    pub fn euclidean(dim: usize, coords: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("point dimension must be positive"));
        }
        if coords.len() % dim != 0 {
            return Err(Error::invalid(format!(
                "{} coordinates do not split into points of dimension {dim}",
                coords.len()
            )));
        }
        Ok(PointSet::Euclidean { dim, coords })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let dim = rows
            .first()
            .map(|r| r.as_ref().len())
            .ok_or_else(|| Error::invalid("empty point list"))?;
        let mut coords = Vec::with_capacity(dim * rows.len());
        for r in rows {
            let r = r.as_ref();
            if r.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: r.len(),
                });
            }
            coords.extend_from_slice(r);
        }
        Self::euclidean(dim, coords)
    }

    pub fn len(&self) -> usize {
        match self {
            PointSet::Euclidean { dim, coords } => coords.len() / dim,
            PointSet::Poses(p) => p.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Euclidean dimension, or `None` for poses.
    pub fn dim(&self) -> Option<usize> {
        match self {
            PointSet::Euclidean { dim, .. } => Some(*dim),
            PointSet::Poses(_) => None,
        }
    }

    pub fn get(&self, i: usize) -> PointRef<'_> {
        match self {
            PointSet::Euclidean { dim, coords } => PointRef::Euclidean(&coords[i * dim..(i + 1) * dim]),
            PointSet::Poses(p) => PointRef::Pose(&p[i]),
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = PointRef<'_>> + '_ {
        (0..self.len()).map(move |i| self.get(i))
    }

    /// Position of point `i` padded or truncated to 3D; poses yield their translation.
    pub fn position(&self, i: usize) -> Vector3<f64> {
        self.get(i).position()
    }

    pub fn positions(&self) -> Vec<Vector3<f64>> {
        (0..self.len()).map(|i| self.position(i)).collect()
    }

    /// Same-kind check used before combining two sets in one kernel sum.
    pub fn check_compatible(&self, other: &PointSet) -> Result<()> {
        match (self, other) {
            (PointSet::Euclidean { dim: a, .. }, PointSet::Euclidean { dim: b, .. }) if a != b => {
                Err(Error::DimensionMismatch {
                    expected: *a,
                    found: *b,
                })
            }
            (PointSet::Euclidean { .. }, PointSet::Poses(_))
            | (PointSet::Poses(_), PointSet::Euclidean { .. }) => Err(Error::invalid(
                "cannot mix Euclidean points and poses in one kernel evaluation",
            )),
            _ => Ok(()),
        }
    }

    /// New set holding the points at `indices`, in order.
    pub fn select(&self, indices: &[usize]) -> PointSet {
        match self {
            PointSet::Euclidean { dim, coords } => {
                let mut out = Vec::with_capacity(indices.len() * dim);
                for &i in indices {
                    out.extend_from_slice(&coords[i * dim..(i + 1) * dim]);
                }
                PointSet::Euclidean {
                    dim: *dim,
                    coords: out,
                }
            }
            PointSet::Poses(p) => PointSet::Poses(indices.iter().map(|&i| p[i]).collect()),
        }
    }

    pub fn is_finite(&self) -> bool {
        match self {
            PointSet::Euclidean { coords, .. } => coords.iter().all(|x| x.is_finite()),
            PointSet::Poses(p) => p.iter().all(|p| p.is_valid(1e-6)),
        }
    }
}

impl PointRef<'_> {
    pub fn position(&self) -> Vector3<f64> {
        match self {
            PointRef::Euclidean(x) => {
                let mut p = Vector3::zeros();
                for (dst, src) in p.iter_mut().zip(x.iter()) {
                    *dst = *src;
                }
                p
            }
            PointRef::Pose(p) => p.translation,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rows_round_trip() {
        let s = PointSet::from_rows(&[[1.0, 2.0], [3.0, 4.0]]).unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(s.dim(), Some(2));
        assert_eq!(s.position(1), Vector3::new(3.0, 4.0, 0.0));
        assert_eq!(s.select(&[1, 1]).len(), 2);
    }

    #[test]
    fn rejects_ragged_rows() {
        assert!(PointSet::from_rows(&[vec![1.0, 2.0], vec![3.0]]).is_err());
        assert!(PointSet::euclidean(2, vec![1.0, 2.0, 3.0]).is_err());
    }

    #[test]
    fn compatibility() {
        let a = PointSet::from_rows(&[[1.0, 2.0]]).unwrap();
        let b = PointSet::from_rows(&[[1.0, 2.0, 3.0]]).unwrap();
        let c = PointSet::Poses(vec![Pose::identity()]);
        assert!(a.check_compatible(&a).is_ok());
        assert!(a.check_compatible(&b).is_err());
        assert!(a.check_compatible(&c).is_err());
    }
}
