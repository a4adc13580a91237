use nalgebra::{DMatrix, Vector6};

use crate::error::{Error, Result};
use crate::lie::{se3_exp, se3_log, Pose, Twist};
use crate::points::PointSet;
use crate::systems::SerialChain;

/// Finite-difference step of the twist-chart Jacobian.
const CHART_STEP: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FkOutput {
    /// End-effector position in the base frame.
    Position,
    /// Full end-effector pose.
    Pose,
}

/// Space a projection lands in.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Codomain {
    Euclidean(usize),
    Pose,
}

impl Codomain {
    /// Tangent dimension: Euclidean coordinates, or six right-perturbation coordinates.
    pub fn tangent_dim(&self) -> usize {
        match self {
            Codomain::Euclidean(d) => *d,
            Codomain::Pose => 6,
        }
    }

    pub fn accepts(&self, points: &PointSet) -> bool {
        match (self, points) {
            (Codomain::Euclidean(d), PointSet::Euclidean { dim, .. }) => d == dim,
            (Codomain::Pose, PointSet::Poses(_)) => true,
            _ => false,
        }
    }
}

/// The map `g` from states to the search domain.
#[derive(Clone, Debug, PartialEq)]
pub enum ProjectionMap {
    Identity,
    SelectCoordinates(Vec<usize>),
    SerialChainFk { chain: SerialChain, output: FkOutput },
    /// `frame * exp(xi)` for twist states `xi`.
    Se3ExpChart { frame: Pose },
}

impl ProjectionMap {
    pub fn validate(&self, state_dim: usize) -> Result<()> {
        match self {
            ProjectionMap::Identity => Ok(()),
            ProjectionMap::SelectCoordinates(idx) => {
                if idx.is_empty() {
                    return Err(Error::invalid("coordinate selection is empty"));
                }
                if let Some(&bad) = idx.iter().find(|&&i| i >= state_dim) {
                    return Err(Error::invalid(format!(
                        "selected coordinate {bad} is outside a {state_dim}-dimensional state"
                    )));
                }
                Ok(())
            }
            ProjectionMap::SerialChainFk { chain, .. } => {
                chain.validate()?;
                if chain.dof() != state_dim {
                    return Err(Error::DimensionMismatch {
                        expected: chain.dof(),
                        found: state_dim,
                    });
                }
                Ok(())
            }
            ProjectionMap::Se3ExpChart { frame } => {
                if !frame.is_valid(1e-9) {
                    return Err(Error::invalid("chart frame is not a rigid transform"));
                }
                if state_dim != 6 {
                    return Err(Error::DimensionMismatch {
                        expected: 6,
                        found: state_dim,
                    });
                }
                Ok(())
            }
        }
    }

    pub fn codomain(&self, state_dim: usize) -> Codomain {
        match self {
            ProjectionMap::Identity => Codomain::Euclidean(state_dim),
            ProjectionMap::SelectCoordinates(idx) => Codomain::Euclidean(idx.len()),
            ProjectionMap::SerialChainFk {
                output: FkOutput::Position,
                ..
            } => Codomain::Euclidean(3),
            ProjectionMap::SerialChainFk { output: FkOutput::Pose, .. } | ProjectionMap::Se3ExpChart { .. } => {
                Codomain::Pose
            }
        }
    }

    /// Projects every row of the row-major `states` (`state_dim` columns).
    pub fn project_all(&self, states: &[f64], state_dim: usize) -> Result<PointSet> {
        self.validate(state_dim)?;
        let rows = states.chunks_exact(state_dim);
        match self {
            ProjectionMap::Identity => PointSet::euclidean(state_dim, states.to_vec()),
            ProjectionMap::SelectCoordinates(idx) => {
                let coords = rows.flat_map(|x| idx.iter().map(move |&i| x[i])).collect();
                PointSet::euclidean(idx.len(), coords)
            }
            ProjectionMap::SerialChainFk { chain, output } => match output {
                FkOutput::Position => {
                    let mut coords = Vec::with_capacity(3 * states.len() / state_dim);
                    for q in rows {
                        coords.extend(chain.forward_kinematics(q)?.translation.iter());
                    }
                    PointSet::euclidean(3, coords)
                }
                FkOutput::Pose => Ok(PointSet::Poses(
                    rows.map(|q| chain.forward_kinematics(q)).collect::<Result<_>>()?,
                )),
            },
            ProjectionMap::Se3ExpChart { frame } => Ok(PointSet::Poses(
                rows.map(|x| chart_point(frame, x)).collect::<Result<_>>()?,
            )),
        }
    }

    /// Jacobian of `g` at `x` (`tangent_dim x state_dim`). Pose codomains use
    /// right perturbations at `g(x)`.
    pub fn jacobian(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        let n = x.len();
        match self {
            ProjectionMap::Identity => Ok(DMatrix::identity(n, n)),
            ProjectionMap::SelectCoordinates(idx) => {
                let mut j = DMatrix::zeros(idx.len(), n);
                for (r, &c) in idx.iter().enumerate() {
                    j[(r, c)] = 1.0;
                }
                Ok(j)
            }
            ProjectionMap::SerialChainFk { chain, output } => match output {
                FkOutput::Position => Ok(chain.position_jacobian(x)?.1),
                FkOutput::Pose => Ok(chain.body_jacobian(x)?.1),
            },
            ProjectionMap::Se3ExpChart { frame } => chart_jacobian(frame, x),
        }
    }

    /// Adds `J_g(x)^T v` into `out`.
    pub fn pullback_acc(&self, x: &[f64], v: &[f64], out: &mut [f64]) -> Result<()> {
        match self {
            ProjectionMap::Identity => {
                for (o, vi) in out.iter_mut().zip(v) {
                    *o += vi;
                }
            }
            ProjectionMap::SelectCoordinates(idx) => {
                for (&i, vi) in idx.iter().zip(v) {
                    out[i] += vi;
                }
            }
            _ => {
                let j = self.jacobian(x)?;
                for c in 0..j.ncols() {
                    out[c] += j.column(c).iter().zip(v).map(|(a, b)| a * b).sum::<f64>();
                }
            }
        }
        Ok(())
    }
}

fn chart_point(frame: &Pose, x: &[f64]) -> Result<Pose> {
    Ok(frame.compose(&se3_exp(&Twist::from_slice(x)?)?))
}

/// Columns `log(g(x)^{-1} g(x + h e_i)) / h` by central differences.
fn chart_jacobian(frame: &Pose, x: &[f64]) -> Result<DMatrix<f64>> {
    let base = chart_point(frame, x)?;
    let inv = base.inverse();
    let mut j = DMatrix::zeros(6, 6);
    let mut xp = x.to_vec();
    for i in 0..6 {
        xp[i] = x[i] + CHART_STEP;
        let plus = se3_log(&inv.compose(&chart_point(frame, &xp)?))?.to_vector();
        xp[i] = x[i] - CHART_STEP;
        let minus = se3_log(&inv.compose(&chart_point(frame, &xp)?))?.to_vector();
        xp[i] = x[i];
        let col: Vector6<f64> = (plus - minus) / (2.0 * CHART_STEP);
        j.column_mut(i).copy_from(&col);
    }
    Ok(j)
}
