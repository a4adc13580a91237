//! Serial revolute chains in product-of-exponentials form.

use nalgebra::{DMatrix, Matrix3, Vector3, Vector6};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lie::{se3_exp, Pose, Twist};

/// Revolute joint: rotation about `axis` through `point`, both in the base
/// frame at the home configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RevoluteJoint {
    pub axis: [f64; 3],
    pub point: [f64; 3],
    pub lower: f64,
    pub upper: f64,
    /// Joint speed limit (rad/s).
    pub velocity: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SerialChain {
    #[serde(default)]
    pub name: String,
    pub joints: Vec<RevoluteJoint>,
    /// End-effector position at `q = 0`.
    pub home_translation: [f64; 3],
    /// End-effector orientation at `q = 0` (row-major rotation matrix).
    #[serde(default = "identity_rows")]
    pub home_rotation: [[f64; 3]; 3],
}

fn identity_rows() -> [[f64; 3]; 3] {
    [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]
}

impl RevoluteJoint {
    pub fn new(axis: [f64; 3], point: [f64; 3], lower: f64, upper: f64, velocity: f64) -> Self {
        Self {
            axis,
            point,
            lower,
            upper,
            velocity,
        }
    }

    /// Unit screw `[w; -w x q]`.
    pub fn screw(&self) -> Vector6<f64> {
        let w = Vector3::from(self.axis);
        let q = Vector3::from(self.point);
        let v = -w.cross(&q);
        Vector6::new(w.x, w.y, w.z, v.x, v.y, v.z)
    }
}

impl SerialChain {
    pub fn new(joints: Vec<RevoluteJoint>, home: Pose) -> Result<Self> {
        let r = home.rotation;
        let chain = Self {
            name: String::new(),
            joints,
            home_translation: home.translation.into(),
            home_rotation: [
                [r[(0, 0)], r[(0, 1)], r[(0, 2)]],
                [r[(1, 0)], r[(1, 1)], r[(1, 2)]],
                [r[(2, 0)], r[(2, 1)], r[(2, 2)]],
            ],
        };
        chain.validate()?;
        Ok(chain)
    }

    /// Planar chain in the xy-plane with links along +x and z-axis joints.
    pub fn planar(lengths: &[f64]) -> Result<Self> {
        let mut x = 0.0;
        let mut joints = Vec::with_capacity(lengths.len());
        for &l in lengths {
            joints.push(RevoluteJoint::new(
                [0.0, 0.0, 1.0],
                [x, 0.0, 0.0],
                -std::f64::consts::PI,
                std::f64::consts::PI,
                1.0,
            ));
            x += l;
        }
        Self::new(joints, Pose::from_translation(Vector3::new(x, 0.0, 0.0)))
    }

    pub fn validate(&self) -> Result<()> {
        if self.joints.is_empty() {
            return Err(Error::invalid("serial chain has no joints"));
        }
        for (i, j) in self.joints.iter().enumerate() {
            let n = Vector3::from(j.axis).norm();
            if (n - 1.0).abs() > 1e-9 {
                return Err(Error::invalid(format!("joint {i} axis is not a unit vector (norm {n})")));
            }
            if !(j.lower < j.upper) {
                return Err(Error::invalid(format!("joint {i} limits are not ordered: [{}, {}]", j.lower, j.upper)));
            }
            if !(j.velocity > 0.0) {
                return Err(Error::invalid(format!("joint {i} velocity limit must be positive")));
            }
        }
        if !self.home().is_valid(1e-9) {
            return Err(Error::invalid("chain home rotation is not a rotation matrix"));
        }
        Ok(())
    }

    pub fn dof(&self) -> usize {
        self.joints.len()
    }

    pub fn home(&self) -> Pose {
        let r = self.home_rotation;
        Pose::new(
            Matrix3::new(r[0][0], r[0][1], r[0][2], r[1][0], r[1][1], r[1][2], r[2][0], r[2][1], r[2][2]),
            Vector3::from(self.home_translation),
        )
    }

    pub fn lower_limits(&self) -> Vec<f64> {
        self.joints.iter().map(|j| j.lower).collect()
    }

    pub fn upper_limits(&self) -> Vec<f64> {
        self.joints.iter().map(|j| j.upper).collect()
    }

    pub fn velocity_limits(&self) -> Vec<f64> {
        self.joints.iter().map(|j| j.velocity).collect()
    }

    fn check(&self, q: &[f64]) -> Result<()> {
        if q.len() != self.dof() {
            return Err(Error::DimensionMismatch {
                expected: self.dof(),
                found: q.len(),
            });
        }
        if q.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("joint vector has non-finite entries"));
        }
        Ok(())
    }

    /// `exp([S1] q1) ... exp([Sn] qn) M`.
    pub fn forward_kinematics(&self, q: &[f64]) -> Result<Pose> {
        self.check(q)?;
        let mut t = Pose::identity();
        for (j, &qi) in self.joints.iter().zip(q) {
            t = t.compose(&se3_exp(&Twist::from_vector(&(j.screw() * qi)))?);
        }
        Ok(t.compose(&self.home()))
    }

    /// End-effector pose and the space Jacobian (6 x n, `[angular; linear]` rows).
    pub fn space_jacobian(&self, q: &[f64]) -> Result<(Pose, DMatrix<f64>)> {
        self.check(q)?;
        let mut jac = DMatrix::zeros(6, self.dof());
        let mut t = Pose::identity();
        for (i, (j, &qi)) in self.joints.iter().zip(q).enumerate() {
            let s = j.screw();
            let col = t.adjoint() * s;
            jac.column_mut(i).copy_from(&col);
            t = t.compose(&se3_exp(&Twist::from_vector(&(s * qi)))?);
        }
        Ok((t.compose(&self.home()), jac))
    }

    /// Jacobian of the end-effector position (3 x n).
    pub fn position_jacobian(&self, q: &[f64]) -> Result<(Vector3<f64>, DMatrix<f64>)> {
        let (pose, js) = self.space_jacobian(q)?;
        let p = pose.translation;
        let mut jp = DMatrix::zeros(3, self.dof());
        for i in 0..self.dof() {
            let w = Vector3::new(js[(0, i)], js[(1, i)], js[(2, i)]);
            let v = Vector3::new(js[(3, i)], js[(4, i)], js[(5, i)]);
            jp.column_mut(i).copy_from(&(w.cross(&p) + v));
        }
        Ok((p, jp))
    }

    /// Body Jacobian (6 x n): `T^{-1} dT/dq_i = [J_b[:, i]]`, matching right perturbations.
    pub fn body_jacobian(&self, q: &[f64]) -> Result<(Pose, DMatrix<f64>)> {
        let (pose, js) = self.space_jacobian(q)?;
        let rt = pose.rotation.transpose();
        let p = pose.translation;
        let mut jb = DMatrix::zeros(6, self.dof());
        for i in 0..self.dof() {
            let w = Vector3::new(js[(0, i)], js[(1, i)], js[(2, i)]);
            let v = Vector3::new(js[(3, i)], js[(4, i)], js[(5, i)]);
            let wb = rt * w;
            let vb = rt * (v + w.cross(&p));
            jb.fixed_view_mut::<3, 1>(0, i).copy_from(&wb);
            jb.fixed_view_mut::<3, 1>(3, i).copy_from(&vb);
        }
        Ok((pose, jb))
    }

    /// Sum of link lengths from the first joint to the end effector.
    ///
    /// Bounds how far the end effector moves per radian of any single joint.
    pub fn reach(&self) -> f64 {
        let mut pts: Vec<Vector3<f64>> = self.joints.iter().map(|j| Vector3::from(j.point)).collect();
        pts.push(Vector3::from(self.home_translation));
        pts.windows(2).map(|w| (w[1] - w[0]).norm()).sum()
    }
}
