use crate::error::{Error, Result};

/// Time-indexed states and controls, stored row-major.
///
/// `controls[t]` drives `states[t] -> states[t + 1]`; the last control has no
/// successor state and is kept so both sequences have the same length.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub state_dim: usize,
    pub control_dim: usize,
    pub dt: f64,
    pub states: Vec<f64>,
    pub controls: Vec<f64>,
}

impl Trajectory {
    pub fn new(state_dim: usize, control_dim: usize, dt: f64, states: Vec<f64>, controls: Vec<f64>) -> Result<Self> {
        let traj = Self {
            state_dim,
            control_dim,
            dt,
            states,
            controls,
        };
        traj.validate()?;
        Ok(traj)
    }

    /// Trajectory of `horizon` copies of `x0` with zero controls.
    pub fn hold(x0: &[f64], control_dim: usize, dt: f64, horizon: usize) -> Result<Self> {
        Self::new(
            x0.len(),
            control_dim,
            dt,
            x0.repeat(horizon),
            vec![0.0; control_dim * horizon],
        )
    }

    pub fn validate(&self) -> Result<()> {
        if self.state_dim == 0 {
            return Err(Error::invalid("state dimension must be positive"));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::invalid(format!("dt must be positive, got {}", self.dt)));
        }
        if self.states.is_empty() || self.states.len() % self.state_dim != 0 {
            return Err(Error::invalid(format!(
                "{} state entries do not form a trajectory of dimension {}",
                self.states.len(),
                self.state_dim
            )));
        }
        let horizon = self.horizon();
        if self.controls.len() != horizon * self.control_dim {
            return Err(Error::DimensionMismatch {
                expected: horizon * self.control_dim,
                found: self.controls.len(),
            });
        }
        if self.states.iter().chain(&self.controls).any(|v| !v.is_finite()) {
            return Err(Error::invalid("trajectory has non-finite entries"));
        }
        Ok(())
    }

    pub fn horizon(&self) -> usize {
        self.states.len() / self.state_dim
    }

    pub fn state(&self, t: usize) -> &[f64] {
        &self.states[t * self.state_dim..(t + 1) * self.state_dim]
    }

    pub fn control(&self, t: usize) -> &[f64] {
        &self.controls[t * self.control_dim..(t + 1) * self.control_dim]
    }

    pub fn state_mut(&mut self, t: usize) -> &mut [f64] {
        &mut self.states[t * self.state_dim..(t + 1) * self.state_dim]
    }

    pub fn control_mut(&mut self, t: usize) -> &mut [f64] {
        &mut self.controls[t * self.control_dim..(t + 1) * self.control_dim]
    }

    /// Number of decision variables in the direct-transcription layout.
    pub fn num_variables(&self) -> usize {
        self.states.len() + self.controls.len()
    }

    /// `[states..., controls...]`.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut z = Vec::with_capacity(self.num_variables());
        z.extend_from_slice(&self.states);
        z.extend_from_slice(&self.controls);
        z
    }

    /// Overwrites states and controls from a flat vector produced by [`Self::to_flat`].
    pub fn set_flat(&mut self, z: &[f64]) {
        let ns = self.states.len();
        self.states.copy_from_slice(&z[..ns]);
        self.controls.copy_from_slice(&z[ns..]);
    }

    /// Trajectory made of the first `len` time steps.
    pub fn prefix(&self, len: usize) -> Trajectory {
        Trajectory {
            state_dim: self.state_dim,
            control_dim: self.control_dim,
            dt: self.dt,
            states: self.states[..len * self.state_dim].to_vec(),
            controls: self.controls[..len * self.control_dim].to_vec(),
        }
    }
}
