//! Frank-Wolfe policy optimization for action-constrained reinforcement
//! learning.
//!
//! The crate provides:
//!
//! * [`geometry`] — convex constraint sets with membership, projection, and
//!   linear-maximization oracles (two-phase simplex, Dykstra's alternating
//!   projections, projected gradient ascent);
//! * [`tabular`] — finite-state MDPs with analytic action gradients, exact
//!   matrix-form policy evaluation, and Frank-Wolfe policy optimization with
//!   full convergence diagnostics;
//! * [`neural`] — a minimal dense network with hand-written forward/backward
//!   passes, input gradients, Adam, and Polyak target updates;
//! * [`agents`] — the Frank-Wolfe actor-critic agent and projection-based
//!   deterministic-policy-gradient baselines sharing one replay stack;
//! * [`envs`] — three simulated constrained-control environments;
//! * [`harness`] — experiment configuration, seeding, training/evaluation
//!   loops, metric persistence, and the `fwpo` command-line interface.
//!
//! The numeric kernels are generic over the scalar type via [`scalar::Scalar`];
//! the aliases below pin the `f64` instantiations used by the agents,
//! environments, and harness.

pub mod agents;
pub mod envs;
pub mod geometry;
pub mod harness;
pub mod linalg;
pub mod neural;
pub mod scalar;
pub mod tabular;

pub use scalar::Scalar;

/// Constraint set over `f64` actions.
pub type ConstraintSet = geometry::ConstraintSet<f64>;
/// Dense row-major `f64` matrix.
pub type Matrix = linalg::Matrix<f64>;
/// Tabular policy over `f64` actions.
pub type TabularPolicy = tabular::TabularPolicy<f64>;
/// Dense network over `f64` parameters.
pub type DenseNet = neural::DenseNet<f64>;
/// Adam state over `f64` parameters.
pub type AdamState = neural::AdamState<f64>;
