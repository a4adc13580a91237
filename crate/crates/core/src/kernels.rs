//! Positive-definite kernels on Euclidean space and SE(3).
//!
//! Both families are bounded with values in `(0, 1]` and continuous. The RBF
//! kernel is characteristic on compact Euclidean domains, which is what makes
//! the MMD built from it metrize weak convergence of the trajectory statistics.

use nalgebra::{DMatrix, Vector6};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lie::{se3_log, weighted_tangent_norm_sq, Pose, TangentWeight, Twist};
use crate::points::{PointRef, PointSet};

/// Largest subset used by the median heuristic.
pub const MEDIAN_SUBSET: usize = 1000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelFamily {
    /// `exp(-|a - b|^2 / (2 sigma^2))`.
    RbfEuclidean,
    /// `exp(-|log(a^{-1} b)|_W^2)` on poses.
    Se3Logmap,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub family: KernelFamily,
    /// RBF length scale. The SE(3) family carries its scale in `tangent_weight`
    /// and uses the bandwidth only as a nominal length for reporting.
    pub bandwidth: f64,
    #[serde(default)]
    pub tangent_weight: TangentWeight,
}

impl KernelSpec {
    pub fn rbf(bandwidth: f64) -> Result<Self> {
        let spec = Self {
            family: KernelFamily::RbfEuclidean,
            bandwidth,
            tangent_weight: TangentWeight::identity(),
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn se3(tangent_weight: TangentWeight, nominal_bandwidth: f64) -> Result<Self> {
        let spec = Self {
            family: KernelFamily::Se3Logmap,
            bandwidth: nominal_bandwidth,
            tangent_weight,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.bandwidth > 0.0 && self.bandwidth.is_finite()) {
            return Err(Error::invalid(format!(
                "kernel bandwidth must be positive and finite, got {}",
                self.bandwidth
            )));
        }
        TangentWeight::new(*self.tangent_weight.matrix())?;
        Ok(())
    }

    #[inline]
    pub fn rbf_eval(&self, a: &[f64], b: &[f64]) -> f64 {
        let r2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
        (-r2 / (2.0 * self.bandwidth * self.bandwidth)).exp()
    }

    /// Adds `scale * d k(a, b) / d a` into `out`.
    #[inline]
    pub fn rbf_grad_first_acc(&self, a: &[f64], b: &[f64], scale: f64, out: &mut [f64]) {
        let inv = 1.0 / (self.bandwidth * self.bandwidth);
        let k = self.rbf_eval(a, b);
        let c = -scale * k * inv;
        for ((o, x), y) in out.iter_mut().zip(a).zip(b) {
            *o += c * (x - y);
        }
    }

    pub fn se3_eval(&self, a: &Pose, b: &Pose) -> Result<f64> {
        let xi = se3_log(&a.between(b))?;
        Ok((-weighted_tangent_norm_sq(&xi, &self.tangent_weight)).exp())
    }

    /// Gradient in the right-perturbation chart at `a`, by central differences.
    pub fn se3_grad_first(&self, a: &Pose, b: &Pose) -> Result<Vector6<f64>> {
        let dist = se3_log(&a.between(b))?.to_vector().norm();
        let h = 1e-6 * dist.max(1.0);
        let mut g = Vector6::zeros();
        for i in 0..6 {
            let mut e = Vector6::zeros();
            e[i] = h;
            let plus = a.retract(&Twist::from_vector(&e))?;
            let minus = a.retract(&Twist::from_vector(&-e))?;
            g[i] = (self.se3_eval(&plus, b)? - self.se3_eval(&minus, b)?) / (2.0 * h);
        }
        Ok(g)
    }

    pub fn eval(&self, a: PointRef<'_>, b: PointRef<'_>) -> Result<f64> {
        match (self.family, a, b) {
            (KernelFamily::RbfEuclidean, PointRef::Euclidean(a), PointRef::Euclidean(b)) => {
                check_dims(a, b)?;
                Ok(self.rbf_eval(a, b))
            }
            (KernelFamily::Se3Logmap, PointRef::Pose(a), PointRef::Pose(b)) => self.se3_eval(a, b),
            _ => Err(self.mismatch()),
        }
    }

    /// Gradient of `k(a, b)` with respect to `a`: Euclidean coordinates for
    /// RBF, the six right-perturbation coordinates for SE(3).
    pub fn grad_first(&self, a: PointRef<'_>, b: PointRef<'_>) -> Result<Vec<f64>> {
        match (self.family, a, b) {
            (KernelFamily::RbfEuclidean, PointRef::Euclidean(a), PointRef::Euclidean(b)) => {
                check_dims(a, b)?;
                let mut g = vec![0.0; a.len()];
                self.rbf_grad_first_acc(a, b, 1.0, &mut g);
                Ok(g)
            }
            (KernelFamily::Se3Logmap, PointRef::Pose(a), PointRef::Pose(b)) => {
                Ok(self.se3_grad_first(a, b)?.iter().copied().collect())
            }
            _ => Err(self.mismatch()),
        }
    }

    /// Checks that `points` lives in this kernel's space.
    pub fn check_points(&self, points: &PointSet) -> Result<()> {
        match (self.family, points) {
            (KernelFamily::RbfEuclidean, PointSet::Euclidean { .. })
            | (KernelFamily::Se3Logmap, PointSet::Poses(_)) => Ok(()),
            _ => Err(self.mismatch()),
        }
    }

    /// Dense Gram matrix, assembled row-parallel.
    pub fn gram_matrix(&self, points: &PointSet) -> Result<DMatrix<f64>> {
        self.check_points(points)?;
        let n = points.len();
        let rows: Vec<Vec<f64>> = (0..n)
            .into_par_iter()
            .map(|i| (0..n).map(|j| self.eval(points.get(i), points.get(j))).collect())
            .collect::<Result<_>>()?;
        Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
    }

    fn mismatch(&self) -> Error {
        Error::invalid(format!("points do not live in the {:?} kernel's space", self.family))
    }
}

fn check_dims(a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            found: b.len(),
        });
    }
    Ok(())
}

fn median_sorted(v: &[f64]) -> f64 {
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Median pairwise distance divided by `sqrt(2)`.
///
/// Uses at most [`MEDIAN_SUBSET`] points, chosen uniformly with a seeded RNG.
/// Even pair counts take the mean of the two middle distances. Poses are
/// compared by translation.
pub fn bandwidth_median_heuristic(samples: &PointSet, seed: u64) -> Result<f64> {
    let n = samples.len();
    if n < 2 {
        return Err(Error::DegenerateDomain(
            "median heuristic needs at least two samples".into(),
        ));
    }
    let subset: Vec<usize> = if n <= MEDIAN_SUBSET {
        (0..n).collect()
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut idx = rand::seq::index::sample(&mut rng, n, MEDIAN_SUBSET).into_vec();
        idx.sort_unstable();
        idx
    };
    let mut dists = Vec::with_capacity(subset.len() * (subset.len() - 1) / 2);
    for (a, &i) in subset.iter().enumerate() {
        for &j in &subset[a + 1..] {
            let d = match (samples.get(i), samples.get(j)) {
                (PointRef::Euclidean(x), PointRef::Euclidean(y)) => {
                    x.iter().zip(y).map(|(p, q)| (p - q) * (p - q)).sum::<f64>().sqrt()
                }
                (p, q) => (p.position() - q.position()).norm(),
            };
            dists.push(d);
        }
    }
    dists.sort_by(f64::total_cmp);
    let median = median_sorted(&dists);
    if median <= 0.0 || !median.is_finite() {
        return Err(Error::DegenerateDomain(
            "median pairwise distance is zero (samples are identical)".into(),
        ));
    }
    Ok(median / std::f64::consts::SQRT_2)
}
