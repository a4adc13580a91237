//! Dynamics, serial-chain kinematics, constraints and running costs.

mod chain;
mod constraints;
mod cost;
mod dynamics;

pub use chain::{RevoluteJoint, SerialChain};
pub use constraints::{evaluate_constraints, max_violation, ConstraintSet, Equality, Inequality};
pub use cost::{smoothness_cost, smoothness_gradient_acc, RunningCost};
pub use dynamics::{DynamicsKind, DynamicsModel};
