//! Constrained point mass: damped double-integrator dynamics with either the
//! two-dimensional torque-style constraints (a sum bound plus a Euclidean
//! norm bound) or a state-dependent output-power constraint
//! `Σ_i |v_i a_i| ≤ budget` with the velocities as weights.
//!
//! Reward is negative distance to a per-episode goal minus a small action
//! penalty, so returns are directly comparable across variants.

use super::{require_feasible, ConstraintSet, EnvError, Environment, Step};
use crate::linalg::Matrix;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, PartialEq)]
pub enum PointMassVariant {
    /// `|u₁ + u₂| ≤ 0.1` and `u₁² + u₂² ≤ 0.02` in two dimensions.
    Reacher,
    /// `Σ_i |v_i a_i| ≤ budget` with box-bounded actions.
    Power { budget: f64 },
}

#[derive(Debug, Clone)]
pub struct PointMassConfig {
    pub variant: PointMassVariant,
    pub dim: usize,
    pub dt: f64,
    pub friction: f64,
    /// Box half-width on actions (power variant).
    pub action_bound: f64,
    /// Goals are sampled uniformly from `[−goal_radius, goal_radius]^dim`.
    pub goal_radius: f64,
    pub episode_length: usize,
}

impl PointMassConfig {
    pub fn reacher() -> Self {
        Self {
            variant: PointMassVariant::Reacher,
            dim: 2,
            dt: 0.1,
            friction: 0.5,
            action_bound: 1.0,
            goal_radius: 0.25,
            episode_length: 50,
        }
    }

    pub fn power() -> Self {
        Self {
            variant: PointMassVariant::Power { budget: 1.0 },
            dim: 3,
            dt: 0.1,
            friction: 0.5,
            action_bound: 1.0,
            goal_radius: 0.25,
            episode_length: 50,
        }
    }
}

pub struct PointMassEnv {
    cfg: PointMassConfig,
    pos: Vec<f64>,
    vel: Vec<f64>,
    goal: Vec<f64>,
    rng: ChaCha8Rng,
    step_count: usize,
    /// Cached state-independent constraint (reacher variant).
    fixed_constraint: Option<ConstraintSet>,
}

impl PointMassEnv {
    pub fn new(cfg: PointMassConfig) -> Result<Self, EnvError> {
        if cfg.dt <= 0.0 || cfg.friction < 0.0 || cfg.episode_length == 0 {
            return Err(EnvError::InvalidConfig(
                "dt, friction, episode_length out of range".into(),
            ));
        }
        match cfg.variant {
            PointMassVariant::Reacher => {
                if cfg.dim != 2 {
                    return Err(EnvError::InvalidConfig(
                        "reacher variant is two-dimensional".into(),
                    ));
                }
            }
            PointMassVariant::Power { budget } => {
                if budget <= 0.0 {
                    return Err(EnvError::InvalidConfig(
                        "power budget must be positive".into(),
                    ));
                }
                if cfg.action_bound <= 0.0 {
                    return Err(EnvError::InvalidConfig(
                        "action bound must be positive".into(),
                    ));
                }
            }
        }
        let fixed_constraint = match cfg.variant {
            PointMassVariant::Reacher => Some(reacher_constraint()?),
            PointMassVariant::Power { .. } => None,
        };
        Ok(Self {
            pos: vec![0.0; cfg.dim],
            vel: vec![0.0; cfg.dim],
            goal: vec![0.0; cfg.dim],
            rng: ChaCha8Rng::seed_from_u64(0),
            step_count: 0,
            cfg,
            fixed_constraint,
        })
    }

    pub fn config(&self) -> &PointMassConfig {
        &self.cfg
    }

    fn observation(&self) -> Vec<f64> {
        let mut obs = self.pos.clone();
        obs.extend_from_slice(&self.vel);
        obs.extend_from_slice(&self.goal);
        obs
    }

    fn power_constraint(&self, vel: &[f64]) -> ConstraintSet {
        let d = self.cfg.dim;
        let budget = match self.cfg.variant {
            PointMassVariant::Power { budget } => budget,
            PointMassVariant::Reacher => unreachable!(),
        };
        let bound = self.cfg.action_bound;
        let boxed =
            ConstraintSet::box_set(vec![-bound; d], vec![bound; d]).expect("valid action box");
        let weights: Vec<f64> = vel.iter().map(|v| v.abs()).collect();
        let power = ConstraintSet::weighted_l1(weights, budget).expect("positive budget");
        ConstraintSet::intersection(vec![boxed, power], vec![0.0; d]).expect("origin is feasible")
    }
}

fn reacher_constraint() -> Result<ConstraintSet, EnvError> {
    let halves = ConstraintSet::halfspaces(
        Matrix::from_rows(&[vec![1.0, 1.0], vec![-1.0, -1.0]]),
        vec![0.1, 0.1],
    )?;
    let ball = ConstraintSet::l2_ball(vec![0.0, 0.0], 0.02f64.sqrt())?;
    Ok(ConstraintSet::intersection(
        vec![halves, ball],
        vec![0.0, 0.0],
    )?)
}

impl Environment for PointMassEnv {
    fn state_dim(&self) -> usize {
        3 * self.cfg.dim
    }

    fn action_dim(&self) -> usize {
        self.cfg.dim
    }

    fn episode_length(&self) -> usize {
        self.cfg.episode_length
    }

    fn constraint_of(&self, state: &[f64]) -> ConstraintSet {
        match self.cfg.variant {
            PointMassVariant::Reacher => self.fixed_constraint.clone().unwrap(),
            PointMassVariant::Power { .. } => {
                let d = self.cfg.dim;
                self.power_constraint(&state[d..2 * d])
            }
        }
    }

    fn reset(&mut self, seed: u64) -> Vec<f64> {
        self.rng = ChaCha8Rng::seed_from_u64(seed);
        self.pos = vec![0.0; self.cfg.dim];
        self.vel = vec![0.0; self.cfg.dim];
        let r = self.cfg.goal_radius;
        self.goal = (0..self.cfg.dim)
            .map(|_| self.rng.random_range(-r..r))
            .collect();
        self.step_count = 0;
        self.observation()
    }

    fn step(&mut self, action: &[f64]) -> Result<Step, EnvError> {
        let set = self.constraint_of(&self.observation());
        require_feasible(&set, action, self.step_count)?;

        let dt = self.cfg.dt;
        let friction = self.cfg.friction;
        for i in 0..self.cfg.dim {
            self.vel[i] += dt * (action[i] - friction * self.vel[i]);
            self.pos[i] += dt * self.vel[i];
        }
        let dist = self
            .pos
            .iter()
            .zip(&self.goal)
            .map(|(p, g)| (p - g) * (p - g))
            .sum::<f64>()
            .sqrt();
        let action_norm = action.iter().map(|a| a * a).sum::<f64>().sqrt();
        let reward = -dist - 0.01 * action_norm;
        self.step_count += 1;
        let done = self.step_count >= self.cfg.episode_length || dist < 0.01;
        Ok(Step {
            next_state: self.observation(),
            reward,
            done,
        })
    }

    fn action_bounds(&self) -> (Vec<f64>, Vec<f64>) {
        match self.cfg.variant {
            PointMassVariant::Reacher => {
                let r = 0.02f64.sqrt();
                (vec![-r; 2], vec![r; 2])
            }
            PointMassVariant::Power { .. } => {
                let b = self.cfg.action_bound;
                let d = self.cfg.dim;
                (vec![-b; d], vec![b; d])
            }
        }
    }
}
