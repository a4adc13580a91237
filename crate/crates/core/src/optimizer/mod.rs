//! Direct-transcription trajectory optimization of the ergodic metric.
//!
//! Decision variables are every state and control, `z = [x_0..x_{T-1}, u_0..u_{T-1}]`.
//! Dynamics enter as equality constraints and limits as inequalities, and the
//! augmented-Lagrangian method drives an NCG inner solver.

mod al;
mod ncg;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

pub use al::{
    augmented_lagrangian, AlOutcome, ConstrainedProblem, OuterRecord, SolveStatus, SolverOptions,
    VIOLATION_REDUCTION,
};
pub use ncg::{ncg_minimize, NcgOptions, NcgResult, NcgStatus, MIN_STEP};

use crate::domain::DomainSampleSet;
use crate::error::{Error, Result};
use crate::kernels::KernelSpec;
use crate::metric::{emmd_states, emmd_states_with_gradient, ProjectionMap};
use crate::points::PointSet;
use crate::systems::{ConstraintSet, DynamicsKind, DynamicsModel, Equality, Inequality, RunningCost};
use crate::trajectory::Trajectory;

/// Standard deviation of the `perturbed` initialization noise.
pub const PERTURBATION_SCALE: f64 = 1e-2;

/// One ergodic trajectory-optimization problem.
#[derive(Clone, Debug)]
pub struct ProblemSpec {
    pub dynamics: DynamicsModel,
    pub projection: ProjectionMap,
    pub samples: DomainSampleSet,
    pub kernel: KernelSpec,
    pub constraints: ConstraintSet,
    pub running_cost: RunningCost,
    pub x0: Vec<f64>,
    pub horizon: usize,
}

impl ProblemSpec {
    /// Problem with dynamics and initial-state equalities and no limits.
    pub fn new(
        dynamics: DynamicsModel,
        projection: ProjectionMap,
        samples: DomainSampleSet,
        kernel: KernelSpec,
        x0: Vec<f64>,
        horizon: usize,
    ) -> Result<Self> {
        let constraints = ConstraintSet::new()
            .with_equality(Equality::Dynamics(dynamics))
            .with_equality(Equality::InitialState(x0.clone()));
        let p = Self {
            dynamics,
            projection,
            samples,
            kernel,
            constraints,
            running_cost: RunningCost::default(),
            x0,
            horizon,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn with_control_limits(mut self, limits: Vec<f64>) -> Self {
        self.constraints.inequalities.push(Inequality::ControlBox(limits));
        self
    }

    pub fn with_state_limits(mut self, lower: Vec<f64>, upper: Vec<f64>, margin: f64) -> Self {
        self.constraints
            .inequalities
            .push(Inequality::StateBox { lower, upper, margin });
        self
    }

    pub fn with_final_state(mut self, xf: Vec<f64>) -> Self {
        self.constraints.equalities.push(Equality::FinalState(xf));
        self
    }

    pub fn with_running_cost(mut self, cost: RunningCost) -> Self {
        self.running_cost = cost;
        self
    }

    pub fn state_dim(&self) -> usize {
        self.dynamics.state_dim()
    }

    pub fn control_dim(&self) -> usize {
        self.dynamics.control_dim()
    }

    pub fn validate(&self) -> Result<()> {
        self.dynamics.validate()?;
        self.kernel.validate()?;
        self.samples.validate()?;
        let n = self.state_dim();
        if self.horizon == 0 {
            return Err(Error::invalid("horizon must be at least 1"));
        }
        if self.x0.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: self.x0.len(),
            });
        }
        if self.x0.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("initial state has non-finite entries"));
        }
        self.projection.validate(n)?;
        if !self.projection.codomain(n).accepts(&self.samples.points) {
            return Err(Error::invalid(format!(
                "projection lands in {:?} but the samples live elsewhere",
                self.projection.codomain(n)
            )));
        }
        self.kernel.check_points(&self.samples.points)?;
        self.constraints.validate(n, self.control_dim())
    }

    pub fn emmd(&self, traj: &Trajectory) -> Result<f64> {
        emmd_states(&traj.states, traj.state_dim, &self.samples, &self.kernel, &self.projection)
    }

    /// E-MMD plus the running cost.
    pub fn objective(&self, traj: &Trajectory) -> Result<f64> {
        Ok(self.emmd(traj)? + self.running_cost.value(traj))
    }

    fn check_trajectory(&self, traj: &Trajectory) -> Result<()> {
        traj.validate()?;
        if traj.state_dim != self.state_dim() || traj.control_dim != self.control_dim() {
            return Err(Error::invalid(format!(
                "trajectory has dims ({}, {}), problem expects ({}, {})",
                traj.state_dim,
                traj.control_dim,
                self.state_dim(),
                self.control_dim()
            )));
        }
        Ok(())
    }
}

/// Adapter exposing a [`ProblemSpec`] over the flat variable vector.
///
/// The objective is multiplied by `scale` (the horizon). Per-state E-MMD
/// gradients shrink like `1/T`, so without it the dynamics penalty dominates
/// the conditioning more and more as the horizon grows. A constant factor
/// leaves the constrained minimizers unchanged.
struct TranscribedProblem<'a> {
    problem: &'a ProblemSpec,
    template: Trajectory,
    scale: f64,
}

impl TranscribedProblem<'_> {
    fn trajectory(&self, z: &[f64]) -> Trajectory {
        let mut t = self.template.clone();
        t.set_flat(z);
        t
    }
}

impl ConstrainedProblem for TranscribedProblem<'_> {
    fn num_variables(&self) -> usize {
        self.template.num_variables()
    }

    fn objective(&self, z: &[f64]) -> Result<(f64, Vec<f64>)> {
        let p = self.problem;
        let traj = self.trajectory(z);
        let (e, mut gs) = emmd_states_with_gradient(&traj.states, traj.state_dim, &p.samples, &p.kernel, &p.projection)?;
        let mut gc = vec![0.0; traj.controls.len()];
        p.running_cost.gradient_acc(&traj, &mut gs, &mut gc);
        gs.extend(gc);
        gs.iter_mut().for_each(|g| *g *= self.scale);
        Ok((self.scale * (e + p.running_cost.value(&traj)), gs))
    }

    fn constraints(&self, z: &[f64]) -> (Vec<f64>, Vec<f64>) {
        self.problem.constraints.evaluate(&self.trajectory(z))
    }

    fn constraint_transpose(&self, z: &[f64], w_eq: &[f64], w_ineq: &[f64], out: &mut [f64]) {
        let traj = self.trajectory(z);
        let ns = traj.states.len();
        let mut gc = vec![0.0; traj.controls.len()];
        self.problem
            .constraints
            .accumulate_transpose(&traj, w_eq, w_ineq, &mut out[..ns], &mut gc);
        for (o, g) in out[ns..].iter_mut().zip(&gc) {
            *o += g;
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct OptResult {
    pub trajectory: Trajectory,
    pub objective: f64,
    pub emmd: f64,
    /// Max-norm constraint violation.
    pub violation: f64,
    /// Inner gradient norm of the horizon-scaled Lagrangian.
    pub grad_norm: f64,
    pub iterations: usize,
    pub converged: bool,
    pub status: SolveStatus,
    /// Objectives are unscaled; gradient norms and Lagrangian values are in
    /// the solver's horizon-scaled units.
    pub history: Vec<OuterRecord>,
}

/// Solves the problem from `init`.
pub fn solve(problem: &ProblemSpec, init: &Trajectory, opts: &SolverOptions) -> Result<OptResult> {
    problem.validate()?;
    problem.check_trajectory(init)?;
    let adapter = TranscribedProblem {
        problem,
        template: init.clone(),
        scale: init.horizon() as f64,
    };
    let out = augmented_lagrangian(&adapter, &init.to_flat(), opts)?;
    let trajectory = adapter.trajectory(&out.z);
    let emmd = problem.emmd(&trajectory)?;
    let converged = out.converged();
    let mut history = out.history;
    for rec in &mut history {
        rec.objective /= adapter.scale;
    }
    Ok(OptResult {
        trajectory,
        objective: out.objective / adapter.scale,
        emmd,
        violation: out.violation,
        grad_norm: out.grad_norm,
        iterations: out.iterations,
        converged,
        status: out.status,
        history,
    })
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitStrategy {
    /// Every state equals `x0`, zero controls.
    Hold,
    /// Straight line toward the sample centroid.
    #[default]
    LineToCentroid,
    /// `Hold` plus seeded Gaussian noise on the states after `x0`.
    Perturbed,
}

/// Mean of the samples in their own coordinates, for Euclidean sets.
fn euclidean_centroid(points: &PointSet) -> Option<Vec<f64>> {
    let PointSet::Euclidean { dim, coords } = points else {
        return None;
    };
    let m = (coords.len() / dim) as f64;
    let mut c = vec![0.0; *dim];
    for p in coords.chunks_exact(*dim) {
        for (ci, pi) in c.iter_mut().zip(p) {
            *ci += pi;
        }
    }
    c.iter_mut().for_each(|v| *v /= m);
    Some(c)
}

/// Builds a starting trajectory for `problem`.
///
/// `LineToCentroid` needs a coordinate projection (identity or selection);
/// other projections fall back to `Hold` because reaching the centroid would
/// require inverting them.
pub fn initialize_trajectory(problem: &ProblemSpec, strategy: InitStrategy, seed: u64) -> Result<Trajectory> {
    problem.validate()?;
    let (n, m) = (problem.state_dim(), problem.control_dim());
    let big_t = problem.horizon;
    let dt = problem.dynamics.dt;
    let x0 = &problem.x0;
    let mut traj = Trajectory::hold(x0, m, dt, big_t)?;
    match strategy {
        InitStrategy::Hold => {}
        InitStrategy::Perturbed => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let noise = Normal::new(0.0, PERTURBATION_SCALE).expect("positive scale");
            for v in &mut traj.states[n..] {
                *v += noise.sample(&mut rng);
            }
        }
        InitStrategy::LineToCentroid => {
            let indices: Vec<usize> = match &problem.projection {
                ProjectionMap::Identity => (0..n).collect(),
                ProjectionMap::SelectCoordinates(idx) => idx.clone(),
                _ => return Ok(traj),
            };
            let Some(centroid) = euclidean_centroid(&problem.samples.points) else {
                return Ok(traj);
            };
            let mut target = x0.clone();
            for (&i, c) in indices.iter().zip(&centroid) {
                target[i] = *c;
            }
            if big_t < 2 {
                return Ok(traj);
            }
            let span = (big_t - 1) as f64;
            match problem.dynamics.kind {
                DynamicsKind::DoubleIntegrator => {
                    let d = problem.dynamics.dim;
                    for t in 1..big_t {
                        let s = t as f64 / span;
                        for i in 0..d {
                            traj.states[t * n + i] = x0[i] + s * (target[i] - x0[i]);
                            traj.states[t * n + d + i] = (traj.states[t * n + i] - traj.states[(t - 1) * n + i]) / dt;
                        }
                    }
                    for t in 0..big_t - 1 {
                        for i in 0..d {
                            traj.controls[t * m + i] = (traj.states[(t + 1) * n + d + i] - traj.states[t * n + d + i]) / dt;
                        }
                    }
                }
                _ => {
                    for t in 1..big_t {
                        let s = t as f64 / span;
                        for i in 0..n {
                            traj.states[t * n + i] = x0[i] + s * (target[i] - x0[i]);
                        }
                    }
                    for t in 0..big_t - 1 {
                        let u = problem.dynamics.inverse_dynamics(traj.state(t), traj.state(t + 1));
                        traj.control_mut(t).copy_from_slice(&u);
                    }
                }
            }
        }
    }
    Ok(traj)
}
