use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::trajectory::Trajectory;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DynamicsKind {
    /// `x' = x + dt u`.
    SingleIntegrator,
    /// State `[p; v]`, symplectic Euler: `v' = v + dt u`, `p' = p + dt v'`.
    DoubleIntegrator,
    /// Joint positions driven by joint velocities: `q' = q + dt u`.
    JointVelocityChain,
    /// Twist coordinates driven on the chart: `xi' = xi + dt u`.
    Se3TwistIntegrator,
}

/// Discrete-time dynamics `x_{t+1} = f(x_t, u_t)`.
///
/// Every supported kind is linear, `f(x, u) = A x + B u`, which keeps the
/// dynamics-defect Jacobians exact and cheap.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DynamicsModel {
    pub kind: DynamicsKind,
    /// Configuration dimension (positions); 6 for twists.
    pub dim: usize,
    pub dt: f64,
}

impl DynamicsModel {
    pub fn new(kind: DynamicsKind, dim: usize, dt: f64) -> Result<Self> {
        let m = Self { kind, dim, dt };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::invalid("dynamics dimension must be positive"));
        }
        if self.kind == DynamicsKind::Se3TwistIntegrator && self.dim != 6 {
            return Err(Error::DimensionMismatch {
                expected: 6,
                found: self.dim,
            });
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::invalid(format!("dt must be positive, got {}", self.dt)));
        }
        Ok(())
    }

    pub fn state_dim(&self) -> usize {
        match self.kind {
            DynamicsKind::DoubleIntegrator => 2 * self.dim,
            _ => self.dim,
        }
    }

    pub fn control_dim(&self) -> usize {
        self.dim
    }

    /// Indices of the configuration (position) part of the state.
    pub fn position_indices(&self) -> Vec<usize> {
        (0..self.dim).collect()
    }

    fn check(&self, x: &[f64], u: &[f64]) -> Result<()> {
        if x.len() != self.state_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.state_dim(),
                found: x.len(),
            });
        }
        if u.len() != self.control_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.control_dim(),
                found: u.len(),
            });
        }
        Ok(())
    }

    pub fn step(&self, x: &[f64], u: &[f64]) -> Result<Vec<f64>> {
        self.check(x, u)?;
        let mut out = vec![0.0; x.len()];
        self.step_into(x, u, &mut out);
        Ok(out)
    }

    /// Unchecked step; slices must have the model's dimensions.
    pub fn step_into(&self, x: &[f64], u: &[f64], out: &mut [f64]) {
        let dt = self.dt;
        match self.kind {
            DynamicsKind::DoubleIntegrator => {
                let d = self.dim;
                for i in 0..d {
                    let v = x[d + i] + dt * u[i];
                    out[d + i] = v;
                    out[i] = x[i] + dt * v;
                }
            }
            _ => {
                for ((o, xi), ui) in out.iter_mut().zip(x).zip(u) {
                    *o = xi + dt * ui;
                }
            }
        }
    }

    /// `(A, B)` with `f(x, u) = A x + B u`.
    pub fn jacobians(&self) -> (DMatrix<f64>, DMatrix<f64>) {
        let (n, m, dt) = (self.state_dim(), self.control_dim(), self.dt);
        match self.kind {
            DynamicsKind::DoubleIntegrator => {
                let d = self.dim;
                let mut a = DMatrix::identity(n, n);
                let mut b = DMatrix::zeros(n, m);
                for i in 0..d {
                    a[(i, d + i)] = dt;
                    b[(i, i)] = dt * dt;
                    b[(d + i, i)] = dt;
                }
                (a, b)
            }
            _ => (DMatrix::identity(n, n), DMatrix::identity(n, m) * dt),
        }
    }

    /// Applies `controls[t]` for `t < T - 1`; `T = controls.len() / m`.
    pub fn rollout(&self, x0: &[f64], controls: &[f64]) -> Result<Trajectory> {
        let (n, m) = (self.state_dim(), self.control_dim());
        if controls.is_empty() || controls.len() % m != 0 {
            return Err(Error::invalid(format!(
                "{} control entries do not split into controls of dimension {m}",
                controls.len()
            )));
        }
        self.check(x0, &controls[..m])?;
        let horizon = controls.len() / m;
        let mut states = vec![0.0; n * horizon];
        states[..n].copy_from_slice(x0);
        for t in 0..horizon - 1 {
            let (done, rest) = states.split_at_mut((t + 1) * n);
            self.step_into(&done[t * n..], &controls[t * m..(t + 1) * m], &mut rest[..n]);
        }
        Trajectory::new(n, m, self.dt, states, controls.to_vec())
    }

    /// Least-squares control reaching `target` from `x`: `B^+ (target - A x)`.
    pub fn inverse_dynamics(&self, x: &[f64], target: &[f64]) -> Vec<f64> {
        let dt = self.dt;
        match self.kind {
            DynamicsKind::DoubleIntegrator => {
                let d = self.dim;
                // Minimize |p + dt v + dt^2 u - p*|^2 + |v + dt u - v*|^2 per axis.
                (0..d)
                    .map(|i| {
                        let rp = target[i] - x[i] - dt * x[d + i];
                        let rv = target[d + i] - x[d + i];
                        (dt * dt * rp + dt * rv) / (dt.powi(4) + dt * dt)
                    })
                    .collect()
            }
            _ => x.iter().zip(target).map(|(a, b)| (b - a) / dt).collect(),
        }
    }
}
