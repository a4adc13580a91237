use nalgebra::{DMatrix, DVector};

use super::dynamics::DynamicsModel;
use crate::error::{Error, Result};
use crate::trajectory::Trajectory;

/// Residual `h_1 = 0`.
#[derive(Clone, Debug, PartialEq)]
pub enum Equality {
    /// `x_{t+1} - f(x_t, u_t)` for `t < T - 1`.
    Dynamics(DynamicsModel),
    /// `x_0 - target`.
    InitialState(Vec<f64>),
    /// `x_{T-1} - target`.
    FinalState(Vec<f64>),
}

/// Residual `h_2 <= 0`; positive entries are violations.
#[derive(Clone, Debug, PartialEq)]
pub enum Inequality {
    /// `|u_{t,i}| <= limit_i` as `u - limit` and `-u - limit`.
    ControlBox(Vec<f64>),
    /// `lower_i + margin <= x_{t,i} <= upper_i - margin`; infinite bounds emit no residual.
    StateBox { lower: Vec<f64>, upper: Vec<f64>, margin: f64 },
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ConstraintSet {
    pub equalities: Vec<Equality>,
    pub inequalities: Vec<Inequality>,
}

impl ConstraintSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn is_empty(&self) -> bool {
        self.equalities.is_empty() && self.inequalities.is_empty()
    }

    pub fn with_equality(mut self, e: Equality) -> Self {
        self.equalities.push(e);
        self
    }

    pub fn with_inequality(mut self, i: Inequality) -> Self {
        self.inequalities.push(i);
        self
    }

    pub fn validate(&self, state_dim: usize, control_dim: usize) -> Result<()> {
        let check = |expected: usize, found: usize| {
            if expected == found {
                Ok(())
            } else {
                Err(Error::DimensionMismatch { expected, found })
            }
        };
        for e in &self.equalities {
            match e {
                Equality::Dynamics(m) => {
                    m.validate()?;
                    check(state_dim, m.state_dim())?;
                    check(control_dim, m.control_dim())?;
                }
                Equality::InitialState(v) | Equality::FinalState(v) => check(state_dim, v.len())?,
            }
        }
        for i in &self.inequalities {
            match i {
                Inequality::ControlBox(lim) => {
                    check(control_dim, lim.len())?;
                    if lim.iter().any(|l| l.is_nan() || *l < 0.0) {
                        return Err(Error::invalid("control limits must be nonnegative"));
                    }
                }
                Inequality::StateBox { lower, upper, margin } => {
                    check(state_dim, lower.len())?;
                    check(state_dim, upper.len())?;
                    if !(margin.is_finite() && *margin >= 0.0) {
                        return Err(Error::invalid(format!("state margin must be nonnegative, got {margin}")));
                    }
                    for (lo, hi) in lower.iter().zip(upper) {
                        let empty = lo.is_finite() && hi.is_finite() && lo + 2.0 * margin >= *hi;
                        if lo.is_nan() || hi.is_nan() || empty {
                            return Err(Error::invalid(format!("empty state box [{lo}, {hi}] with margin {margin}")));
                        }
                    }
                }
            }
        }
        Ok(())
    }

    pub fn num_equalities(&self, horizon: usize) -> usize {
        self.equalities
            .iter()
            .map(|e| match e {
                Equality::Dynamics(m) => m.state_dim() * horizon.saturating_sub(1),
                Equality::InitialState(v) | Equality::FinalState(v) => v.len(),
            })
            .sum()
    }

    pub fn num_inequalities(&self, horizon: usize) -> usize {
        self.inequalities
            .iter()
            .map(|i| match i {
                Inequality::ControlBox(lim) => 2 * lim.len() * horizon,
                Inequality::StateBox { lower, upper, .. } => {
                    let finite = lower.iter().chain(upper).filter(|v| v.is_finite()).count();
                    finite * horizon
                }
            })
            .sum()
    }

    /// Stacked `(h_1, h_2)` residuals.
    pub fn evaluate(&self, traj: &Trajectory) -> (Vec<f64>, Vec<f64>) {
        let horizon = traj.horizon();
        let mut eq = Vec::with_capacity(self.num_equalities(horizon));
        let mut ineq = Vec::with_capacity(self.num_inequalities(horizon));
        let mut next = vec![0.0; traj.state_dim];
        for e in &self.equalities {
            match e {
                Equality::Dynamics(m) => {
                    for t in 0..horizon.saturating_sub(1) {
                        m.step_into(traj.state(t), traj.control(t), &mut next);
                        eq.extend(traj.state(t + 1).iter().zip(&next).map(|(a, b)| a - b));
                    }
                }
                Equality::InitialState(x0) => eq.extend(traj.state(0).iter().zip(x0).map(|(a, b)| a - b)),
                Equality::FinalState(xf) => eq.extend(traj.state(horizon - 1).iter().zip(xf).map(|(a, b)| a - b)),
            }
        }
        for i in &self.inequalities {
            match i {
                Inequality::ControlBox(lim) => {
                    for t in 0..horizon {
                        for (u, l) in traj.control(t).iter().zip(lim) {
                            ineq.push(u - l);
                            ineq.push(-u - l);
                        }
                    }
                }
                Inequality::StateBox { lower, upper, margin } => {
                    for t in 0..horizon {
                        for ((x, lo), hi) in traj.state(t).iter().zip(lower).zip(upper) {
                            if lo.is_finite() {
                                ineq.push(lo + margin - x);
                            }
                            if hi.is_finite() {
                                ineq.push(x - (hi - margin));
                            }
                        }
                    }
                }
            }
        }
        (eq, ineq)
    }

    /// Adds `J_1^T w_eq + J_2^T w_ineq` into the state and control gradients.
    pub fn accumulate_transpose(
        &self,
        traj: &Trajectory,
        w_eq: &[f64],
        w_ineq: &[f64],
        grad_states: &mut [f64],
        grad_controls: &mut [f64],
    ) {
        let (n, m) = (traj.state_dim, traj.control_dim);
        let horizon = traj.horizon();
        let mut k = 0;
        for e in &self.equalities {
            match e {
                Equality::Dynamics(model) => {
                    let (a, b) = model.jacobians();
                    let (at, bt): (DMatrix<f64>, DMatrix<f64>) = (a.transpose(), b.transpose());
                    for t in 0..horizon.saturating_sub(1) {
                        let w = DVector::from_column_slice(&w_eq[k..k + n]);
                        k += n;
                        for (g, wi) in grad_states[(t + 1) * n..(t + 2) * n].iter_mut().zip(w.iter()) {
                            *g += wi;
                        }
                        let ga = &at * &w;
                        for (g, v) in grad_states[t * n..(t + 1) * n].iter_mut().zip(ga.iter()) {
                            *g -= v;
                        }
                        let gb = &bt * &w;
                        for (g, v) in grad_controls[t * m..(t + 1) * m].iter_mut().zip(gb.iter()) {
                            *g -= v;
                        }
                    }
                }
                Equality::InitialState(v) => {
                    for (g, w) in grad_states[..n].iter_mut().zip(&w_eq[k..k + v.len()]) {
                        *g += w;
                    }
                    k += v.len();
                }
                Equality::FinalState(v) => {
                    let off = (horizon - 1) * n;
                    for (g, w) in grad_states[off..off + n].iter_mut().zip(&w_eq[k..k + v.len()]) {
                        *g += w;
                    }
                    k += v.len();
                }
            }
        }
        let mut k = 0;
        for i in &self.inequalities {
            match i {
                Inequality::ControlBox(lim) => {
                    for t in 0..horizon {
                        for j in 0..lim.len() {
                            grad_controls[t * m + j] += w_ineq[k] - w_ineq[k + 1];
                            k += 2;
                        }
                    }
                }
                Inequality::StateBox { lower, upper, .. } => {
                    for t in 0..horizon {
                        for j in 0..n {
                            if lower[j].is_finite() {
                                grad_states[t * n + j] -= w_ineq[k];
                                k += 1;
                            }
                            if upper[j].is_finite() {
                                grad_states[t * n + j] += w_ineq[k];
                                k += 1;
                            }
                        }
                    }
                }
            }
        }
    }
}

/// Stacked `(h_1, h_2)` residuals of `cs` at `traj`.
pub fn evaluate_constraints(cs: &ConstraintSet, traj: &Trajectory) -> (Vec<f64>, Vec<f64>) {
    cs.evaluate(traj)
}

/// Max-norm violation: `max(|h_1|_inf, max(0, h_2)_inf)`.
pub fn max_violation(eq: &[f64], ineq: &[f64]) -> f64 {
    let e = eq.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    ineq.iter().fold(e, |a, v| a.max(*v))
}
