//! Finite-state MDPs with analytic action gradients, exact matrix-form policy
//! evaluation, and Frank-Wolfe policy optimization over direct tabular
//! parameterizations.
//!
//! Policy evaluation solves the Bellman system `(I − γPᵖ) V = rᵖ` with a
//! dense LU factorization, which is exact at the state counts this module
//! targets. The per-iteration update moves each state's action toward the
//! linear-maximization point of the action-gradient of `Q`, with the
//! state-dependent learning rate `α(s) = (1−γ) μ_min g(s) / (L D_s²)` clamped
//! into `[0, 1]` so every iterate stays a convex combination of feasible
//! points.
//!
//! A sample-based tabular mode (neural critic over one-hot states) lives in
//! [`crate::agents`]; this module is the exact, model-based side.

use crate::geometry::{ConstraintSet, GeometryError, DEFAULT_TOL};
use crate::linalg::{self, Matrix};
use crate::scalar::Scalar;

#[derive(Debug, Clone, thiserror::Error)]
pub enum TabularError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("policy infeasible at state {state} (violation {violation:.3e})")]
    InfeasiblePolicy { state: usize, violation: f64 },
    #[error("Bellman solve failed: {0}")]
    BellmanSolve(String),
}

/// Finite-state, continuous-action MDP with analytic reward and transition
/// gradients.
///
/// Rewards take values in `[0, 1]` for feasible actions, `gamma` lies in
/// `(0, 1)`, the restart distribution `mu` is strictly positive, and
/// `smoothness` is an upper bound on the smoothness constant of the
/// performance objective in the policy table.
pub trait SmoothMdp<R: Scalar> {
    fn num_states(&self) -> usize;
    fn action_dim(&self) -> usize;
    fn reward(&self, s: usize, a: &[R]) -> R;
    fn reward_grad(&self, s: usize, a: &[R]) -> Vec<R>;
    /// Probability vector over successor states; sums to one.
    fn transition(&self, s: usize, a: &[R]) -> Vec<R>;
    /// `M×N` matrix with entry `(s', j) = ∂p(s'|s,a)/∂a_j`.
    fn transition_grad(&self, s: usize, a: &[R]) -> Matrix<R>;
    fn gamma(&self) -> R;
    fn constraint(&self, s: usize) -> &ConstraintSet<R>;
    fn mu(&self) -> &[R];
    fn smoothness(&self) -> R;
}

/// Direct policy parameterization: one action vector per state.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularPolicy<R> {
    pub theta: Vec<Vec<R>>,
}

impl<R: Scalar> TabularPolicy<R> {
    /// Validates feasibility of every row against the MDP's constraint sets.
    pub fn new<M: SmoothMdp<R> + ?Sized>(
        mdp: &M,
        theta: Vec<Vec<R>>,
    ) -> Result<Self, TabularError> {
        let pi = Self { theta };
        pi.check_feasible(mdp)?;
        Ok(pi)
    }

    pub fn check_feasible<M: SmoothMdp<R> + ?Sized>(&self, mdp: &M) -> Result<(), TabularError> {
        for (s, row) in self.theta.iter().enumerate() {
            let set = mdp.constraint(s);
            if !set.contains(row, R::of(DEFAULT_TOL))? {
                return Err(TabularError::InfeasiblePolicy {
                    state: s,
                    violation: set.violation(row).as_f64(),
                });
            }
        }
        Ok(())
    }
}

/// Per-iteration convergence record.
#[derive(Debug, Clone)]
pub struct FwpoDiagnostics<R> {
    /// State-wise Frank-Wolfe gaps `g(s)`.
    pub gaps: Vec<R>,
    /// Applied learning rates `α(s)`.
    pub alphas: Vec<R>,
    /// Effective gap `√(Σ_s g(s)²)`.
    pub effective_gap: R,
    /// Objective `J_μ` at the pre-update policy.
    pub objective: R,
}

/// Row-stochastic matrix `Pᵖ` with entry `(i, j) = p(j | i, π(i))`.
pub fn transition_matrix<R: Scalar, M: SmoothMdp<R> + ?Sized>(
    mdp: &M,
    pi: &TabularPolicy<R>,
) -> Matrix<R> {
    let m = mdp.num_states();
    let mut p = Matrix::zeros(m, m);
    for s in 0..m {
        let probs = mdp.transition(s, &pi.theta[s]);
        p.row_mut(s).copy_from_slice(&probs);
    }
    p
}

/// Exact state values: solves `V = rᵖ + γ Pᵖ V`.
pub fn exact_v<R: Scalar, M: SmoothMdp<R> + ?Sized>(
    mdp: &M,
    pi: &TabularPolicy<R>,
) -> Result<Vec<R>, TabularError> {
    let m = mdp.num_states();
    let gamma = mdp.gamma();
    let p = transition_matrix(mdp, pi);
    let rewards: Vec<R> = (0..m).map(|s| mdp.reward(s, &pi.theta[s])).collect();
    let mut system = Matrix::identity(m);
    for i in 0..m {
        for j in 0..m {
            system[(i, j)] = system[(i, j)] - gamma * p[(i, j)];
        }
    }
    let v = linalg::lu_solve(system, &rewards).ok_or_else(|| {
        TabularError::BellmanSolve("singular Bellman system; transition matrix corrupt".into())
    })?;
    let backed = p.matvec(&v);
    let residual = v
        .iter()
        .zip(rewards.iter().zip(&backed))
        .map(|(vi, (ri, bi))| (*vi - *ri - gamma * *bi).abs())
        .fold(R::zero(), R::max);
    // 1e-9 at f64; wider scalar types get a tolerance scaled to their epsilon.
    let tol = R::of(1e-9).max(R::epsilon() * R::of(100.0));
    if residual > tol {
        return Err(TabularError::BellmanSolve(format!(
            "Bellman residual {residual} exceeds {tol}"
        )));
    }
    Ok(v)
}

/// `∇_a Q(s, a; π)` at `a = π(s)`, from the one-step decomposition
/// `∇_a r(s,a) + γ Σ_{s'} ∇_a p(s'|s,a) V(s')`.
pub fn exact_q_grad<R: Scalar, M: SmoothMdp<R> + ?Sized>(
    mdp: &M,
    pi: &TabularPolicy<R>,
    s: usize,
) -> Result<Vec<R>, TabularError> {
    let v = exact_v(mdp, pi)?;
    Ok(q_grad_with_values(mdp, pi, s, &v))
}

fn q_grad_with_values<R: Scalar, M: SmoothMdp<R> + ?Sized>(
    mdp: &M,
    pi: &TabularPolicy<R>,
    s: usize,
    v: &[R],
) -> Vec<R> {
    let a = &pi.theta[s];
    let mut grad = mdp.reward_grad(s, a);
    let pgrad = mdp.transition_grad(s, a);
    let weighted = pgrad.matvec_t(v);
    linalg::axpy(&mut grad, mdp.gamma(), &weighted);
    grad
}

/// `J_μ(π) = Σ_s μ(s) V(s; π)`.
pub fn objective<R: Scalar, M: SmoothMdp<R> + ?Sized>(
    mdp: &M,
    pi: &TabularPolicy<R>,
) -> Result<R, TabularError> {
    let v = exact_v(mdp, pi)?;
    Ok(linalg::dot(mdp.mu(), &v))
}

/// One Frank-Wolfe policy iteration: exact evaluation, state-wise linear
/// maximization, gap-proportional learning rates, convex-combination update.
pub fn fwpo_step<R: Scalar, M: SmoothMdp<R> + ?Sized>(
    mdp: &M,
    pi: &TabularPolicy<R>,
) -> Result<(TabularPolicy<R>, FwpoDiagnostics<R>), TabularError> {
    let m = mdp.num_states();
    let v = exact_v(mdp, pi)?;
    let j = linalg::dot(mdp.mu(), &v);
    let gamma = mdp.gamma();
    let mu_min = mdp.mu().iter().fold(R::infinity(), |acc, x| acc.min(*x));
    let l = mdp.smoothness();

    let mut theta_next = Vec::with_capacity(m);
    let mut gaps = Vec::with_capacity(m);
    let mut alphas = Vec::with_capacity(m);
    for s in 0..m {
        let grad = q_grad_with_values(mdp, pi, s, &v);
        let set = mdp.constraint(s);
        let direction_point = set.lmo(&grad)?;
        let gap = linalg::dot(&linalg::sub(&direction_point, &pi.theta[s]), &grad);
        let d = set.diameter()?;
        let alpha_raw = (R::one() - gamma) * mu_min * gap / (l * d * d);
        let alpha = alpha_raw.max(R::zero()).min(R::one());
        let mut row = pi.theta[s].clone();
        for (x, c) in row.iter_mut().zip(&direction_point) {
            *x = *x + alpha * (*c - *x);
        }
        theta_next.push(row);
        gaps.push(gap);
        alphas.push(alpha);
    }
    let effective_gap = gaps.iter().map(|g| *g * *g).sum::<R>().sqrt();
    Ok((
        TabularPolicy { theta: theta_next },
        FwpoDiagnostics {
            gaps,
            alphas,
            effective_gap,
            objective: j,
        },
    ))
}

/// Runs `k` Frank-Wolfe iterations and returns the final policy with one
/// diagnostics record per iteration.
pub fn run_fwpo<R: Scalar, M: SmoothMdp<R> + ?Sized>(
    mdp: &M,
    pi0: TabularPolicy<R>,
    k: usize,
) -> Result<(TabularPolicy<R>, Vec<FwpoDiagnostics<R>>), TabularError> {
    assert!(k >= 1, "run_fwpo needs at least one iteration");
    let mut pi = pi0;
    let mut records = Vec::with_capacity(k);
    for _ in 0..k {
        let (next, diag) = fwpo_step(mdp, &pi)?;
        records.push(diag);
        pi = next;
    }
    Ok((pi, records))
}

/// Cumulative-gap bound from the gap-proportional learning-rate schedule:
/// `Σ_k 𝒢_k² ≤ 2 L D_max² / ((1−γ)³ μ_min²)`.
pub fn gap_budget<R: Scalar, M: SmoothMdp<R> + ?Sized>(mdp: &M) -> Result<R, TabularError> {
    let mut d_max = R::zero();
    for s in 0..mdp.num_states() {
        d_max = d_max.max(mdp.constraint(s).diameter()?);
    }
    let mu_min = mdp.mu().iter().fold(R::infinity(), |acc, x| acc.min(*x));
    let one_minus_gamma = R::one() - mdp.gamma();
    Ok(R::of(2.0) * mdp.smoothness() * d_max * d_max / (one_minus_gamma.powi(3) * mu_min * mu_min))
}

pub mod synthetic;
