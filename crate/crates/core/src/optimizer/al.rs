//! Augmented-Lagrangian outer loop around the NCG inner solver.

use serde::{Deserialize, Serialize};

use super::ncg::{ncg_minimize, NcgOptions, NcgStatus};
use crate::error::{Error, Result};
use crate::systems::max_violation;

/// Required reduction of the violation per outer iteration before the penalty grows.
pub const VIOLATION_REDUCTION: f64 = 0.5;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverOptions {
    pub max_outer_iters: usize,
    pub max_inner_iters: usize,
    pub grad_tol: f64,
    pub constraint_tol: f64,
    pub penalty_init: f64,
    pub penalty_growth: f64,
    pub penalty_max: f64,
    pub armijo_c1: f64,
    pub backtrack_factor: f64,
    pub seed: u64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            max_outer_iters: 20,
            max_inner_iters: 500,
            grad_tol: 1e-5,
            constraint_tol: 1e-4,
            penalty_init: 10.0,
            penalty_growth: 10.0,
            penalty_max: 1e8,
            armijo_c1: 1e-4,
            backtrack_factor: 0.5,
            seed: 0,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("grad_tol", self.grad_tol),
            ("constraint_tol", self.constraint_tol),
            ("penalty_init", self.penalty_init),
            ("penalty_max", self.penalty_max),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::invalid(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.penalty_growth > 1.0) {
            return Err(Error::invalid(format!("penalty_growth must exceed 1, got {}", self.penalty_growth)));
        }
        if self.penalty_init > self.penalty_max {
            return Err(Error::invalid("penalty_init exceeds penalty_max"));
        }
        if !(self.armijo_c1 > 0.0 && self.armijo_c1 < 0.5) {
            return Err(Error::invalid(format!("armijo_c1 must lie in (0, 0.5), got {}", self.armijo_c1)));
        }
        if !(self.backtrack_factor > 0.0 && self.backtrack_factor < 1.0) {
            return Err(Error::invalid(format!(
                "backtrack_factor must lie in (0, 1), got {}",
                self.backtrack_factor
            )));
        }
        if self.max_outer_iters == 0 {
            return Err(Error::invalid("max_outer_iters must be positive"));
        }
        Ok(())
    }

    pub fn ncg(&self) -> NcgOptions {
        NcgOptions {
            max_iters: self.max_inner_iters,
            grad_tol: self.grad_tol,
            armijo_c1: self.armijo_c1,
            backtrack_factor: self.backtrack_factor,
        }
    }
}

/// `min f(z)` subject to `h_1(z) = 0`, `h_2(z) <= 0`.
pub trait ConstrainedProblem: Sync {
    fn num_variables(&self) -> usize;
    /// Objective value and gradient; errors make the point unusable.
    fn objective(&self, z: &[f64]) -> Result<(f64, Vec<f64>)>;
    fn constraints(&self, z: &[f64]) -> (Vec<f64>, Vec<f64>);
    /// Adds `J_1^T w_eq + J_2^T w_ineq` into `out`.
    fn constraint_transpose(&self, z: &[f64], w_eq: &[f64], w_ineq: &[f64], out: &mut [f64]);
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Converged,
    /// Ran out of outer iterations before meeting both tolerances.
    MaxIterations,
    /// Penalty at its cap with violation above ten times the tolerance.
    Infeasible,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OuterRecord {
    pub objective: f64,
    pub violation: f64,
    /// Penalty used by this iteration's inner solve.
    pub penalty: f64,
    pub inner_iterations: usize,
    pub grad_norm: f64,
    /// Augmented Lagrangian at the start and end of the inner solve.
    pub lagrangian_start: f64,
    pub lagrangian_end: f64,
    pub penalty_increased: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AlOutcome {
    pub z: Vec<f64>,
    pub objective: f64,
    pub violation: f64,
    pub grad_norm: f64,
    pub iterations: usize,
    pub status: SolveStatus,
    pub history: Vec<OuterRecord>,
}

impl AlOutcome {
    pub fn converged(&self) -> bool {
        self.status == SolveStatus::Converged
    }
}

struct Lagrangian<'a, P: ConstrainedProblem + ?Sized> {
    problem: &'a P,
    lambda: &'a [f64],
    nu: &'a [f64],
    rho: f64,
}

impl<P: ConstrainedProblem + ?Sized> Lagrangian<'_, P> {
    /// `f + lambda.h1 + rho/2 |h1|^2 + 1/(2 rho) (|max(0, nu + rho h2)|^2 - |nu|^2)`.
    fn eval(&self, z: &[f64]) -> (f64, Vec<f64>) {
        let Ok((f, mut g)) = self.problem.objective(z) else {
            return (f64::NAN, vec![f64::NAN; z.len()]);
        };
        let (h1, h2) = self.problem.constraints(z);
        let rho = self.rho;
        let mut value = f;
        let w1: Vec<f64> = h1
            .iter()
            .zip(self.lambda)
            .map(|(h, l)| {
                value += l * h + 0.5 * rho * h * h;
                l + rho * h
            })
            .collect();
        let w2: Vec<f64> = h2
            .iter()
            .zip(self.nu)
            .map(|(h, n)| {
                let s = (n + rho * h).max(0.0);
                value += (s * s - n * n) / (2.0 * rho);
                s
            })
            .collect();
        self.problem.constraint_transpose(z, &w1, &w2, &mut g);
        (value, g)
    }
}

/// Runs the augmented-Lagrangian method from `z0`.
///
/// Multipliers update as `lambda += rho h1`, `nu = max(0, nu + rho h2)`; the
/// penalty grows by `penalty_growth` (capped) whenever the violation fails to
/// halve while still above `constraint_tol`. The returned point is the
/// converged iterate if any, else the lowest-objective iterate within
/// `constraint_tol`, else the least violating.
pub fn augmented_lagrangian<P: ConstrainedProblem + ?Sized>(
    problem: &P,
    z0: &[f64],
    opts: &SolverOptions,
) -> Result<AlOutcome> {
    opts.validate()?;
    if z0.len() != problem.num_variables() {
        return Err(Error::DimensionMismatch {
            expected: problem.num_variables(),
            found: z0.len(),
        });
    }
    let (f0, g0) = problem.objective(z0)?;
    if !f0.is_finite() || g0.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("objective is not finite at the initial point"));
    }
    let (h1, h2) = problem.constraints(z0);
    let mut lambda = vec![0.0; h1.len()];
    let mut nu = vec![0.0; h2.len()];
    let mut rho = opts.penalty_init;
    let mut prev_violation = max_violation(&h1, &h2);
    let mut z = z0.to_vec();
    let mut history = Vec::new();
    let mut best: Option<(Vec<f64>, f64, f64, f64)> = None;
    let mut status = SolveStatus::MaxIterations;
    let ncg_opts = opts.ncg();

    for _ in 0..opts.max_outer_iters {
        let lag = Lagrangian {
            problem,
            lambda: &lambda,
            nu: &nu,
            rho,
        };
        let lagrangian_start = lag.eval(&z).0;
        let inner = ncg_minimize(|x| lag.eval(x), &z, &ncg_opts)?;
        z = inner.x;
        let objective = problem.objective(&z)?.0;
        let (h1, h2) = problem.constraints(&z);
        let violation = max_violation(&h1, &h2);
        for (l, h) in lambda.iter_mut().zip(&h1) {
            *l += rho * h;
        }
        for (n, h) in nu.iter_mut().zip(&h2) {
            *n = (*n + rho * h).max(0.0);
        }
        let converged = violation <= opts.constraint_tol && inner.grad_norm <= opts.grad_tol;
        let feasible = violation <= opts.constraint_tol;
        let better = match &best {
            None => true,
            Some((_, bo, bv, _)) => {
                let best_feasible = *bv <= opts.constraint_tol;
                match (feasible, best_feasible) {
                    (true, true) => objective < *bo,
                    (true, false) => true,
                    (false, true) => false,
                    (false, false) => violation < *bv,
                }
            }
        };
        if converged || better {
            best = Some((z.clone(), objective, violation, inner.grad_norm));
        }
        let mut record = OuterRecord {
            objective,
            violation,
            penalty: rho,
            inner_iterations: inner.iterations,
            grad_norm: inner.grad_norm,
            lagrangian_start,
            lagrangian_end: inner.value,
            penalty_increased: false,
        };
        log::debug!(
            "outer {}: objective {objective:.6e} violation {violation:.3e} rho {rho:.1e} inner {} ({:?}) |grad| {:.3e}",
            history.len(),
            inner.iterations,
            inner.status,
            inner.grad_norm
        );
        if converged {
            history.push(record);
            status = SolveStatus::Converged;
            break;
        }
        let stalled_feasibility = violation > VIOLATION_REDUCTION * prev_violation && violation > opts.constraint_tol;
        if stalled_feasibility && rho < opts.penalty_max {
            rho = (rho * opts.penalty_growth).min(opts.penalty_max);
            record.penalty_increased = true;
        }
        history.push(record);
        prev_violation = violation;
        // Without constraints another outer pass would restart from the same point.
        if inner.status == NcgStatus::Stalled && h1.is_empty() && h2.is_empty() {
            break;
        }
    }
    let (z, objective, violation, grad_norm) = best.expect("at least one outer iteration");
    if status != SolveStatus::Converged && rho >= opts.penalty_max && violation > 10.0 * opts.constraint_tol {
        status = SolveStatus::Infeasible;
    }
    Ok(AlOutcome {
        z,
        objective,
        violation,
        grad_norm,
        iterations: history.len(),
        status,
        history,
    })
}
