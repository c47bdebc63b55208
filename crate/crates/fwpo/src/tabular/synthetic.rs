//! Synthetic smooth MDPs used as optimization benchmarks.
//!
//! Both families have analytic reward/transition gradients and rewards in
//! `[0, 1]`, so exact evaluation and the convergence diagnostics apply.

use super::SmoothMdp;
use crate::geometry::ConstraintSet;
use crate::linalg::Matrix;
use crate::scalar::Scalar;

/// Single-state bandit with reward `1 − ‖a − target‖² / curvature` over a box.
///
/// The constrained optimum is `target` whenever it lies inside the box, which
/// makes convergence checks exact.
pub struct QuadraticBandit<R> {
    pub target: Vec<R>,
    pub curvature: R,
    pub gamma: R,
    pub smoothness: R,
    constraint: ConstraintSet<R>,
    mu: Vec<R>,
}

impl<R: Scalar> QuadraticBandit<R> {
    pub fn new(target: Vec<R>, curvature: R, gamma: R, lo: Vec<R>, hi: Vec<R>) -> Self {
        let constraint = ConstraintSet::box_set(lo, hi).expect("valid box");
        // J(θ) = r(θ)/(1−γ) has Hessian (2/curvature)/(1−γ)·I.
        let smoothness = R::of(2.0) / (curvature * (R::one() - gamma));
        Self {
            target,
            curvature,
            gamma,
            smoothness,
            constraint,
            mu: vec![R::one()],
        }
    }

    /// The default two-dimensional instance: target (0.3, −0.2) inside
    /// [−1, 1]², curvature 3.2 (keeps rewards in [0, 1] over the box), γ = 0.2.
    /// The small discount keeps the gap-proportional learning rate from
    /// being overly conservative, so the gap drops below 1e-3 well within
    /// 200 iterations.
    pub fn default_2d() -> Self {
        Self::new(
            vec![R::of(0.3), R::of(-0.2)],
            R::of(3.2),
            R::of(0.2),
            vec![R::of(-1.0); 2],
            vec![R::of(1.0); 2],
        )
    }
}

impl<R: Scalar> SmoothMdp<R> for QuadraticBandit<R> {
    fn num_states(&self) -> usize {
        1
    }
    fn action_dim(&self) -> usize {
        self.target.len()
    }
    fn reward(&self, _s: usize, a: &[R]) -> R {
        let sq = a
            .iter()
            .zip(&self.target)
            .map(|(x, t)| (*x - *t) * (*x - *t))
            .sum::<R>();
        R::one() - sq / self.curvature
    }
    fn reward_grad(&self, _s: usize, a: &[R]) -> Vec<R> {
        a.iter()
            .zip(&self.target)
            .map(|(x, t)| -R::of(2.0) * (*x - *t) / self.curvature)
            .collect()
    }
    fn transition(&self, _s: usize, _a: &[R]) -> Vec<R> {
        vec![R::one()]
    }
    fn transition_grad(&self, _s: usize, _a: &[R]) -> Matrix<R> {
        Matrix::zeros(1, self.target.len())
    }
    fn gamma(&self) -> R {
        self.gamma
    }
    fn constraint(&self, _s: usize) -> &ConstraintSet<R> {
        &self.constraint
    }
    fn mu(&self) -> &[R] {
        &self.mu
    }
    fn smoothness(&self) -> R {
        self.smoothness
    }
}

/// Three-state MDP with softmax transitions and sigmoid rewards over
/// state-specific linear maps of the action; every gradient is analytic.
pub struct SoftmaxMdp<R> {
    /// Per-state `M×N` logit maps.
    logit_maps: Vec<Matrix<R>>,
    /// Per-state logit offsets.
    logit_offsets: Vec<Vec<R>>,
    /// Per-state reward weight vectors and offsets.
    reward_weights: Vec<Vec<R>>,
    reward_offsets: Vec<R>,
    gamma: R,
    mu: Vec<R>,
    constraints: Vec<ConstraintSet<R>>,
    /// Objective smoothness bound supplied by the caller.
    pub smoothness: R,
}

impl<R: Scalar> SoftmaxMdp<R> {
    /// Fixed three-state, two-action-dimension instance over the box [−1, 1]²
    /// with γ = 0.9 and uniform restarts. `smoothness` is the caller's bound.
    pub fn three_state(smoothness: R) -> Self {
        let c = R::of;
        let logit_maps = vec![
            Matrix::from_rows(&[
                vec![c(0.6), c(-0.3)],
                vec![c(-0.2), c(0.5)],
                vec![c(0.1), c(0.2)],
            ]),
            Matrix::from_rows(&[
                vec![c(-0.4), c(0.2)],
                vec![c(0.3), c(0.3)],
                vec![c(0.0), c(-0.5)],
            ]),
            Matrix::from_rows(&[
                vec![c(0.2), c(0.4)],
                vec![c(-0.5), c(0.1)],
                vec![c(0.3), c(-0.2)],
            ]),
        ];
        let logit_offsets = vec![
            vec![c(0.1), c(0.0), c(-0.1)],
            vec![c(0.0), c(0.2), c(0.1)],
            vec![c(-0.2), c(0.1), c(0.0)],
        ];
        let reward_weights = vec![
            vec![c(0.7), c(-0.4)],
            vec![c(-0.3), c(0.6)],
            vec![c(0.5), c(0.5)],
        ];
        let reward_offsets = vec![c(0.2), c(-0.1), c(0.0)];
        let third = R::one() / c(3.0);
        let constraints = (0..3)
            .map(|_| ConstraintSet::box_set(vec![c(-1.0); 2], vec![c(1.0); 2]).expect("valid box"))
            .collect();
        Self {
            logit_maps,
            logit_offsets,
            reward_weights,
            reward_offsets,
            gamma: c(0.9),
            mu: vec![third; 3],
            constraints,
            smoothness,
        }
    }

    fn softmax(&self, s: usize, a: &[R]) -> Vec<R> {
        let logits: Vec<R> = self.logit_maps[s]
            .matvec(a)
            .iter()
            .zip(&self.logit_offsets[s])
            .map(|(x, o)| *x + *o)
            .collect();
        let max = logits.iter().fold(R::neg_infinity(), |m, x| m.max(*x));
        let exps: Vec<R> = logits.iter().map(|x| (*x - max).exp()).collect();
        let total = exps.iter().copied().sum::<R>();
        exps.into_iter().map(|e| e / total).collect()
    }
}

fn sigmoid<R: Scalar>(x: R) -> R {
    R::one() / (R::one() + (-x).exp())
}

impl<R: Scalar> SmoothMdp<R> for SoftmaxMdp<R> {
    fn num_states(&self) -> usize {
        3
    }
    fn action_dim(&self) -> usize {
        2
    }
    fn reward(&self, s: usize, a: &[R]) -> R {
        let z = crate::linalg::dot(&self.reward_weights[s], a) + self.reward_offsets[s];
        sigmoid(z)
    }
    fn reward_grad(&self, s: usize, a: &[R]) -> Vec<R> {
        let z = crate::linalg::dot(&self.reward_weights[s], a) + self.reward_offsets[s];
        let sig = sigmoid(z);
        let slope = sig * (R::one() - sig);
        self.reward_weights[s].iter().map(|w| slope * *w).collect()
    }
    fn transition(&self, s: usize, a: &[R]) -> Vec<R> {
        self.softmax(s, a)
    }
    fn transition_grad(&self, s: usize, a: &[R]) -> Matrix<R> {
        // ∂p_j/∂a = p_j (B_j − Σ_k p_k B_k)
        let probs = self.softmax(s, a);
        let b = &self.logit_maps[s];
        let n = self.action_dim();
        let mut mean_row = vec![R::zero(); n];
        for (k, pk) in probs.iter().enumerate() {
            for (mr, bj) in mean_row.iter_mut().zip(b.row(k)) {
                *mr = *mr + *pk * *bj;
            }
        }
        let mut grad = Matrix::zeros(probs.len(), n);
        for (j, pj) in probs.iter().enumerate() {
            for (i, (bj, mr)) in b.row(j).iter().zip(&mean_row).enumerate() {
                grad[(j, i)] = *pj * (*bj - *mr);
            }
        }
        grad
    }
    fn gamma(&self) -> R {
        self.gamma
    }
    fn constraint(&self, s: usize) -> &ConstraintSet<R> {
        &self.constraints[s]
    }
    fn mu(&self) -> &[R] {
        &self.mu
    }
    fn smoothness(&self) -> R {
        self.smoothness
    }
}
