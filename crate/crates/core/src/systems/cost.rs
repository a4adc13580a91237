use serde::{Deserialize, Serialize};

use crate::trajectory::Trajectory;

/// `weight * sum_t |x_{t+1} - x_t|^2`; zero for a single state.
pub fn smoothness_cost(traj: &Trajectory, weight: f64) -> f64 {
    let n = traj.state_dim;
    let s = &traj.states;
    let mut acc = 0.0;
    for t in 0..traj.horizon().saturating_sub(1) {
        for i in 0..n {
            let d = s[(t + 1) * n + i] - s[t * n + i];
            acc += d * d;
        }
    }
    weight * acc
}

/// Adds the gradient of [`smoothness_cost`] with respect to the states.
pub fn smoothness_gradient_acc(traj: &Trajectory, weight: f64, grad_states: &mut [f64]) {
    let n = traj.state_dim;
    let s = &traj.states;
    for t in 0..traj.horizon().saturating_sub(1) {
        for i in 0..n {
            let d = 2.0 * weight * (s[(t + 1) * n + i] - s[t * n + i]);
            grad_states[(t + 1) * n + i] += d;
            grad_states[t * n + i] -= d;
        }
    }
}

/// Running cost `sum_t control_weight |u_t|^2` plus the smoothness term.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunningCost {
    pub control_weight: f64,
    pub smoothness_weight: f64,
}

impl Default for RunningCost {
    fn default() -> Self {
        Self {
            control_weight: 0.0,
            smoothness_weight: 0.0,
        }
    }
}

impl RunningCost {
    pub fn is_zero(&self) -> bool {
        self.control_weight == 0.0 && self.smoothness_weight == 0.0
    }

    pub fn value(&self, traj: &Trajectory) -> f64 {
        let mut v = 0.0;
        if self.control_weight != 0.0 {
            v += self.control_weight * traj.controls.iter().map(|u| u * u).sum::<f64>();
        }
        if self.smoothness_weight != 0.0 {
            v += smoothness_cost(traj, self.smoothness_weight);
        }
        v
    }

    pub fn gradient_acc(&self, traj: &Trajectory, grad_states: &mut [f64], grad_controls: &mut [f64]) {
        if self.control_weight != 0.0 {
            for (g, u) in grad_controls.iter_mut().zip(&traj.controls) {
                *g += 2.0 * self.control_weight * u;
            }
        }
        if self.smoothness_weight != 0.0 {
            smoothness_gradient_acc(traj, self.smoothness_weight, grad_states);
        }
    }
}
