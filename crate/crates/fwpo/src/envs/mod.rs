//! Simulated action-constrained control environments.
//!
//! Every environment exposes a per-state convex feasible-action set and
//! rejects infeasible actions at the default tolerance, so executed-action
//! feasibility is enforced at the boundary rather than trusted to callers.
//! Environments own their RNG; identical seed and action sequence reproduce
//! identical trajectories bitwise.

mod bss;
mod netutil;
mod pointmass;

pub use bss::{BikeShareEnv, BssConfig};
pub use netutil::{FlowSpec, NetUtilConfig, NetUtilEnv};
pub use pointmass::{PointMassConfig, PointMassEnv, PointMassVariant};

use crate::geometry::{ConstraintSet as GenericConstraintSet, GeometryError, DEFAULT_TOL};

pub type ConstraintSet = GenericConstraintSet<f64>;

#[derive(Debug, thiserror::Error)]
pub enum EnvError {
    #[error("infeasible action at step {step} (violation {violation:.3e})")]
    InfeasibleAction { step: usize, violation: f64 },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("invalid environment config: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Step {
    pub next_state: Vec<f64>,
    pub reward: f64,
    pub done: bool,
}

pub trait Environment: Send {
    fn state_dim(&self) -> usize;
    fn action_dim(&self) -> usize;
    fn episode_length(&self) -> usize;
    /// Feasible-action set at the given observation.
    fn constraint_of(&self, state: &[f64]) -> ConstraintSet;
    /// Reinitializes the environment; equivalent to a fresh instance.
    fn reset(&mut self, seed: u64) -> Vec<f64>;
    fn step(&mut self, action: &[f64]) -> Result<Step, EnvError>;
    /// Axis-aligned box enclosing every state's feasible set; used by the
    /// warmup exploration policy.
    fn action_bounds(&self) -> (Vec<f64>, Vec<f64>);
    /// Number of tabular states, for environments with a finite state space.
    fn tabular_state_count(&self) -> Option<usize> {
        None
    }
    fn tabular_state_index(&self, _state: &[f64]) -> Option<usize> {
        None
    }
}

/// Shared feasibility gate used by every environment's `step`.
fn require_feasible(set: &ConstraintSet, action: &[f64], step: usize) -> Result<(), EnvError> {
    if !set.contains(action, DEFAULT_TOL)? {
        return Err(EnvError::InfeasibleAction {
            step,
            violation: set.violation(action),
        });
    }
    Ok(())
}
