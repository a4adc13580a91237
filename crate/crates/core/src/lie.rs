//! Rigid-body geometry on SO(3) and SE(3).
//!
//! Rotations are stored as 3x3 matrices. Twists are ordered `[angular; linear]`
//! whenever they are flattened into a 6-vector, and tangent perturbations of a
//! pose are taken on the right: `P * exp(xi)`.

use nalgebra::{Matrix3, Matrix6, Vector3, Vector6};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Below this rotation angle the exp/log coefficients use Taylor expansions.
pub const SMALL_ANGLE: f64 = 1e-6;

/// The logarithm is rejected for rotation angles within this margin of pi.
pub const BRANCH_MARGIN: f64 = 1e-6;

/// Rigid-body transform.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Pose {
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
}

/// Element of se(3).
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct Twist {
    pub angular: Vector3<f64>,
    pub linear: Vector3<f64>,
}

/// Symmetric positive-definite weight on se(3) coordinates.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct TangentWeight(Matrix6<f64>);

pub fn hat(w: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -w.z, w.y, w.z, 0.0, -w.x, -w.y, w.x, 0.0)
}

pub fn vee(m: &Matrix3<f64>) -> Vector3<f64> {
    Vector3::new(m[(2, 1)], m[(0, 2)], m[(1, 0)])
}

/// `(sin t / t, (1 - cos t) / t^2, (t - sin t) / t^3)` with series fallbacks.
fn exp_coefficients(theta: f64) -> (f64, f64, f64) {
    if theta < SMALL_ANGLE {
        let t2 = theta * theta;
        (1.0 - t2 / 6.0, 0.5 - t2 / 24.0, 1.0 / 6.0 - t2 / 120.0)
    } else {
        let s = theta.sin();
        let half = (0.5 * theta).sin();
        let t2 = theta * theta;
        // 1 - cos t = 2 sin^2(t/2) avoids cancellation just above the threshold.
        (s / theta, 2.0 * half * half / t2, (theta - s) / (t2 * theta))
    }
}

pub fn so3_exp(w: &Vector3<f64>) -> Matrix3<f64> {
    let (a, b, _) = exp_coefficients(w.norm());
    let k = hat(w);
    Matrix3::identity() + k * a + k * k * b
}

/// Principal rotation vector of `r`.
pub fn so3_log(r: &Matrix3<f64>) -> Result<Vector3<f64>> {
    let skew = vee(&(r - r.transpose()));
    let sin_theta = 0.5 * skew.norm();
    let cos_theta = 0.5 * (r.trace() - 1.0);
    let theta = sin_theta.atan2(cos_theta);
    if theta > std::f64::consts::PI - BRANCH_MARGIN {
        return Err(Error::BranchSingularity {
            angle: theta,
            margin: BRANCH_MARGIN,
        });
    }
    let scale = if theta < SMALL_ANGLE {
        0.5 + theta * theta / 12.0
    } else {
        0.5 * theta / theta.sin()
    };
    Ok(skew * scale)
}

impl Twist {
    pub fn new(angular: Vector3<f64>, linear: Vector3<f64>) -> Self {
        Self { angular, linear }
    }

    pub fn zero() -> Self {
        Self::default()
    }

    pub fn from_vector(v: &Vector6<f64>) -> Self {
        Self {
            angular: v.fixed_rows::<3>(0).into_owned(),
            linear: v.fixed_rows::<3>(3).into_owned(),
        }
    }

    /// Reads a twist from `[wx, wy, wz, vx, vy, vz]`.
    pub fn from_slice(s: &[f64]) -> Result<Self> {
        if s.len() != 6 {
            return Err(Error::DimensionMismatch {
                expected: 6,
                found: s.len(),
            });
        }
        Ok(Self::from_vector(&Vector6::from_column_slice(s)))
    }

    pub fn to_vector(&self) -> Vector6<f64> {
        let mut v = Vector6::zeros();
        v.fixed_rows_mut::<3>(0).copy_from(&self.angular);
        v.fixed_rows_mut::<3>(3).copy_from(&self.linear);
        v
    }

    pub fn is_finite(&self) -> bool {
        self.angular.iter().chain(self.linear.iter()).all(|x| x.is_finite())
    }
}

/// SE(3) exponential.
pub fn se3_exp(xi: &Twist) -> Result<Pose> {
    if !xi.is_finite() {
        return Err(Error::invalid("se3_exp: twist has non-finite entries"));
    }
    let theta = xi.angular.norm();
    let (a, b, c) = exp_coefficients(theta);
    let k = hat(&xi.angular);
    let k2 = k * k;
    let rotation = Matrix3::identity() + k * a + k2 * b;
    let v = Matrix3::identity() + k * b + k2 * c;
    Ok(Pose {
        rotation,
        translation: v * xi.linear,
    })
}

/// SE(3) logarithm on the principal branch.
pub fn se3_log(p: &Pose) -> Result<Twist> {
    let angular = so3_log(&p.rotation)?;
    let theta = angular.norm();
    // Coefficient of K^2 in V^{-1} = I - K/2 + d K^2.
    let d = if theta < SMALL_ANGLE {
        1.0 / 12.0 + theta * theta / 720.0
    } else {
        let half = 0.5 * theta;
        (1.0 - half / half.tan()) / (theta * theta)
    };
    let k = hat(&angular);
    let v_inv = Matrix3::identity() - k * 0.5 + k * k * d;
    Ok(Twist {
        angular,
        linear: v_inv * p.translation,
    })
}

impl Pose {
    pub fn identity() -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
        }
    }

    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Self {
        Self {
            rotation,
            translation,
        }
    }

    pub fn from_translation(t: Vector3<f64>) -> Self {
        Self::new(Matrix3::identity(), t)
    }

    /// Pose whose z axis points along `-normal`, positioned at `point`.
    ///
    /// This is the tool frame facing a surface with outward normal `normal`.
    pub fn facing(point: Vector3<f64>, normal: Vector3<f64>) -> Self {
        let z = -normal.normalize();
        let helper = if z.x.abs() < 0.9 {
            Vector3::x()
        } else {
            Vector3::y()
        };
        let x = helper.cross(&z).normalize();
        let y = z.cross(&x);
        Self::new(Matrix3::from_columns(&[x, y, z]), point)
    }

    pub fn compose(&self, other: &Pose) -> Pose {
        Pose {
            rotation: self.rotation * other.rotation,
            translation: self.rotation * other.translation + self.translation,
        }
    }

    pub fn inverse(&self) -> Pose {
        let rt = self.rotation.transpose();
        Pose {
            rotation: rt,
            translation: -(rt * self.translation),
        }
    }

    /// `self^{-1} * other`.
    pub fn between(&self, other: &Pose) -> Pose {
        let rt = self.rotation.transpose();
        Pose {
            rotation: rt * other.rotation,
            translation: rt * (other.translation - self.translation),
        }
    }

    /// `self * exp(xi)`.
    pub fn retract(&self, xi: &Twist) -> Result<Pose> {
        Ok(self.compose(&se3_exp(xi)?))
    }

    /// Adjoint map acting on `[angular; linear]` twists.
    pub fn adjoint(&self) -> Matrix6<f64> {
        let mut ad = Matrix6::zeros();
        ad.fixed_view_mut::<3, 3>(0, 0).copy_from(&self.rotation);
        ad.fixed_view_mut::<3, 3>(3, 3).copy_from(&self.rotation);
        ad.fixed_view_mut::<3, 3>(3, 0)
            .copy_from(&(hat(&self.translation) * self.rotation));
        ad
    }

    pub fn is_valid(&self, tol: f64) -> bool {
        let r = &self.rotation;
        let orth = (r.transpose() * r - Matrix3::identity()).abs().max();
        orth <= tol && (r.determinant() - 1.0).abs() <= tol && self.translation.iter().all(|x| x.is_finite())
    }
}

impl TangentWeight {
    pub fn identity() -> Self {
        Self(Matrix6::identity())
    }

    pub fn new(m: Matrix6<f64>) -> Result<Self> {
        if !m.iter().all(|x| x.is_finite()) {
            return Err(Error::invalid("tangent weight has non-finite entries"));
        }
        if (m - m.transpose()).abs().max() > 1e-12 {
            return Err(Error::invalid("tangent weight is not symmetric"));
        }
        if m.cholesky().is_none() {
            return Err(Error::invalid("tangent weight is not positive definite"));
        }
        Ok(Self(m))
    }

    /// Diagonal weight `diag(w_rx, w_ry, w_rz, w_x, w_y, w_z)`.
    pub fn diagonal(diag: [f64; 6]) -> Result<Self> {
        Self::new(Matrix6::from_diagonal(&Vector6::from_column_slice(&diag)))
    }

    pub fn matrix(&self) -> &Matrix6<f64> {
        &self.0
    }
}

impl Default for TangentWeight {
    fn default() -> Self {
        Self::identity()
    }
}

impl TryFrom<Vec<f64>> for TangentWeight {
    type Error = Error;

    /// Accepts either 6 diagonal entries or 36 row-major entries.
    fn try_from(v: Vec<f64>) -> Result<Self> {
        match v.len() {
            6 => Self::diagonal([v[0], v[1], v[2], v[3], v[4], v[5]]),
            36 => Self::new(Matrix6::from_row_slice(&v)),
            n => Err(Error::invalid(format!(
                "tangent weight needs 6 diagonal or 36 full entries, got {n}"
            ))),
        }
    }
}

impl From<TangentWeight> for Vec<f64> {
    fn from(w: TangentWeight) -> Self {
        let m = w.0;
        let diag = Matrix6::from_diagonal(&m.diagonal());
        if m == diag {
            m.diagonal().iter().copied().collect()
        } else {
            m.transpose().iter().copied().collect()
        }
    }
}

impl std::fmt::Display for TangentWeight {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:?}", Vec::<f64>::from(*self))
    }
}

/// `xi^T W xi`.
pub fn weighted_tangent_norm_sq(xi: &Twist, w: &TangentWeight) -> f64 {
    let v = xi.to_vector();
    (v.transpose() * w.0 * v)[(0, 0)]
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn rodrigues(axis: Vector3<f64>, angle: f64) -> Matrix3<f64> {
        let k = hat(&axis);
        Matrix3::identity() + k * angle.sin() + k * k * (1.0 - angle.cos())
    }

    #[test]
    fn exp_of_zero_is_identity() {
        let p = se3_exp(&Twist::zero()).unwrap();
        assert_eq!(p, Pose::identity());
    }

    #[test]
    fn exp_pure_translation() {
        let p = se3_exp(&Twist::new(Vector3::zeros(), Vector3::new(1.0, 2.0, 3.0))).unwrap();
        assert_eq!(p.rotation, Matrix3::identity());
        assert_eq!(p.translation, Vector3::new(1.0, 2.0, 3.0));
    }

    #[test]
    fn exp_quarter_turn_about_z() {
        let p = se3_exp(&Twist::new(Vector3::new(0.0, 0.0, FRAC_PI_2), Vector3::zeros())).unwrap();
        let oracle = rodrigues(Vector3::z(), FRAC_PI_2);
        let expected = Matrix3::new(0.0, -1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0);
        assert!((oracle - expected).abs().max() < 1e-15);
        assert!((p.rotation - expected).abs().max() < 1e-15);
        assert!(p.translation.norm() < 1e-15);
    }

    #[test]
    fn exp_rejects_non_finite() {
        let xi = Twist::new(Vector3::new(f64::NAN, 0.0, 0.0), Vector3::zeros());
        assert!(matches!(se3_exp(&xi), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn log_identity_and_translation() {
        assert_eq!(se3_log(&Pose::identity()).unwrap(), Twist::zero());
        let xi = se3_log(&Pose::from_translation(Vector3::new(1.0, 2.0, 3.0))).unwrap();
        assert_eq!(xi.angular, Vector3::zeros());
        assert_eq!(xi.linear, Vector3::new(1.0, 2.0, 3.0));
    }

    #[test]
    fn log_round_trip_reference_twist() {
        let xi = Twist::from_slice(&[0.3, -0.2, 0.1, 0.5, 0.0, 0.0]).unwrap();
        let back = se3_log(&se3_exp(&xi).unwrap()).unwrap();
        assert!((back.to_vector() - xi.to_vector()).norm() < 1e-9);
    }

    #[test]
    fn log_rejects_half_turn() {
        let p = Pose::new(rodrigues(Vector3::x(), PI), Vector3::zeros());
        assert!(matches!(se3_log(&p), Err(Error::BranchSingularity { .. })));
        let p = Pose::new(rodrigues(Vector3::y(), PI - 1e-7), Vector3::zeros());
        assert!(se3_log(&p).is_err());
        let p = Pose::new(rodrigues(Vector3::y(), PI - 1e-4), Vector3::zeros());
        assert!(se3_log(&p).is_ok());
    }

    #[test]
    fn inverse_composes_to_identity() {
        let p = se3_exp(&Twist::from_slice(&[0.4, 1.1, -0.7, 2.0, -1.0, 0.3]).unwrap()).unwrap();
        let e = p.inverse().compose(&p);
        assert!((e.rotation - Matrix3::identity()).abs().max() < 1e-9);
        assert!(e.translation.abs().max() < 1e-9);
        assert!(p.is_valid(1e-9));
    }

    #[test]
    fn exp_is_continuous_across_series_threshold() {
        let axis = Vector3::new(1.0, -2.0, 0.5).normalize();
        let lin = Vector3::new(0.3, 0.1, -0.2);
        let at = |a: f64| se3_exp(&Twist::new(axis * a, lin)).unwrap();
        // Slopes between consecutive samples must agree across the threshold.
        let angles: Vec<f64> = (0..=200).map(|i| 1e-7 + (1e-5 - 1e-7) * i as f64 / 200.0).collect();
        let slopes: Vec<f64> = angles
            .windows(2)
            .map(|w| {
                let (a, b) = (at(w[0]), at(w[1]));
                let d = (b.rotation - a.rotation).norm() + (b.translation - a.translation).norm();
                d / (w[1] - w[0])
            })
            .collect();
        for s in slopes.windows(2) {
            assert!((s[1] - s[0]).abs() < 1e-4, "slope jump {} -> {}", s[0], s[1]);
        }
        // Exact Rodrigues on both sides of the threshold.
        for a in [5e-7, 1e-6, 2e-6] {
            let r = rodrigues(axis, a);
            assert!((at(a).rotation - r).abs().max() < 1e-15);
        }
    }

    #[test]
    fn weighted_norm_examples() {
        let w = TangentWeight::diagonal([2.0, 3.0, 1.0, 1.0, 1.0, 1.0]).unwrap();
        assert_eq!(weighted_tangent_norm_sq(&Twist::zero(), &w), 0.0);
        let e1 = Twist::from_slice(&[1.0, 0.0, 0.0, 0.0, 0.0, 0.0]).unwrap();
        assert_eq!(weighted_tangent_norm_sq(&e1, &TangentWeight::identity()), 1.0);
        let xi = Twist::from_slice(&[1.0, 1.0, 0.0, 0.0, 0.0, 0.0]).unwrap();
        assert_eq!(weighted_tangent_norm_sq(&xi, &w), 5.0);
    }

    #[test]
    fn weight_validation() {
        assert!(TangentWeight::diagonal([1.0, 1.0, 1.0, 1.0, 1.0, 0.0]).is_err());
        let mut m = Matrix6::identity();
        m[(0, 1)] = 0.5;
        assert!(TangentWeight::new(m).is_err());
        assert!(TangentWeight::try_from(vec![1.0; 5]).is_err());
        let w = TangentWeight::try_from(vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        assert_eq!(Vec::<f64>::from(w), vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
    }

    #[test]
    fn facing_pose_points_into_surface() {
        let n = Vector3::new(0.0, 0.0, 1.0);
        let p = Pose::facing(Vector3::new(1.0, 2.0, 3.0), n);
        assert!(p.is_valid(1e-12));
        assert!((p.rotation.column(2) + n).norm() < 1e-12);
    }
}
