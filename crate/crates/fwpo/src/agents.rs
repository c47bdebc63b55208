//! Action-constrained actor-critic agents sharing one replay/critic stack:
//!
//! * `Nfwpo` — derives per-state reference actions by projecting the actor
//!   output and advancing it toward the linear-maximization point of the
//!   critic's action gradient, then regresses the actor onto those reference
//!   actions. Projection and linear maximization enter the loss as constants,
//!   so no gradient ever flows through them.
//! * `DdpgProjection` — deterministic policy gradient evaluated at the raw
//!   actor output; the executed action is projected before reaching the
//!   environment.
//! * `DdpgShaping` — projection baseline plus a penalty of
//!   `w·‖pre − executed‖₂` subtracted from the stored reward.
//! * `FwpoTabular` — sample-based tabular mode for finite-state environments:
//!   a policy table updated by state-wise Frank-Wolfe steps against a neural
//!   critic over (one-hot state, action).
//!
//! Executed actions are always projected, so every stored transition is
//! feasible; the pre-projection action (actor output plus exploration noise)
//! is what the violation counters track.

use crate::envs::{EnvError, Environment};
use crate::geometry::{ConstraintSet, GeometryError, DEFAULT_TOL};
use crate::linalg;
use crate::neural::{adam_step, AdamState, DenseNet, Gradients, OutputActivation};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::Distribution;
use rand_distr::StandardNormal;

#[derive(Debug, thiserror::Error)]
pub enum AgentError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error("geometry failure at batch state {index}: {source}")]
    BatchState { index: usize, source: GeometryError },
    #[error("environment provides no tabular state index")]
    NotTabular,
    #[error("invalid agent config: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Algo {
    Nfwpo,
    DdpgProjection,
    DdpgShaping,
    FwpoTabular,
}

impl Algo {
    pub fn name(self) -> &'static str {
        match self {
            Self::Nfwpo => "nfwpo",
            Self::DdpgProjection => "ddpg_projection",
            Self::DdpgShaping => "ddpg_shaping",
            Self::FwpoTabular => "fwpo_tabular",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "nfwpo" => Some(Self::Nfwpo),
            "ddpg_projection" => Some(Self::DdpgProjection),
            "ddpg_shaping" => Some(Self::DdpgShaping),
            "fwpo_tabular" => Some(Self::FwpoTabular),
            _ => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct AgentConfig {
    pub algo: Algo,
    /// Frank-Wolfe learning rate α for reference actions.
    pub fw_lr: f64,
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub tau: f64,
    pub noise_sigma: f64,
    pub batch_size: usize,
    pub gamma: f64,
    /// Reward-shaping weight (shaping baseline only).
    pub shaping_weight: f64,
    pub warmup_steps: usize,
    pub actor_update_period: usize,
    pub hidden: Vec<usize>,
    pub actor_output: OutputActivation,
    pub buffer_capacity: usize,
    /// ε-greedy exploration rate (tabular mode only).
    pub epsilon: f64,
}

impl AgentConfig {
    /// Defaults per algorithm; the harness overrides per-environment values.
    pub fn for_algo(algo: Algo) -> Self {
        let batch_size = match algo {
            Algo::Nfwpo | Algo::FwpoTabular => 16,
            _ => 64,
        };
        Self {
            algo,
            fw_lr: 0.05,
            actor_lr: 1e-4,
            critic_lr: 1e-3,
            tau: 0.001,
            noise_sigma: 0.05,
            batch_size,
            gamma: 0.99,
            shaping_weight: 1.0,
            warmup_steps: 1_000,
            actor_update_period: 1,
            hidden: vec![64, 64],
            actor_output: OutputActivation::Tanh,
            buffer_capacity: 100_000,
            epsilon: 0.1,
        }
    }

    pub fn validate(&self) -> Result<(), AgentError> {
        let bad = |m: &str| Err(AgentError::InvalidConfig(m.into()));
        if !(self.fw_lr > 0.0 && self.fw_lr <= 1.0) {
            return bad("fw_lr must lie in (0, 1]");
        }
        if self.noise_sigma < 0.0 {
            return bad("noise_sigma must be nonnegative");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1");
        }
        if !(self.gamma >= 0.0 && self.gamma < 1.0) {
            return bad("gamma must lie in [0, 1)");
        }
        if !(0.0..=1.0).contains(&self.tau) {
            return bad("tau must lie in [0, 1]");
        }
        if self.actor_update_period == 0 {
            return bad("actor_update_period must be at least 1");
        }
        if self.buffer_capacity < self.batch_size {
            return bad("buffer capacity smaller than batch size");
        }
        if !(0.0..=1.0).contains(&self.epsilon) {
            return bad("epsilon must lie in [0, 1]");
        }
        Ok(())
    }
}

/// One stored environment interaction.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub state: Vec<f64>,
    pub action: Vec<f64>,
    pub reward: f64,
    pub next_state: Vec<f64>,
    pub done: bool,
    /// Pre-projection action (actor output plus noise) was infeasible.
    pub pre_violation: bool,
    /// Tabular state indices, filled by the trainer for tabular policies.
    pub state_index: Option<usize>,
    pub next_state_index: Option<usize>,
}

impl Transition {
    pub fn new(
        state: Vec<f64>,
        action: Vec<f64>,
        reward: f64,
        next_state: Vec<f64>,
        done: bool,
        pre_violation: bool,
    ) -> Self {
        Self {
            state,
            action,
            reward,
            next_state,
            done,
            pre_violation,
            state_index: None,
            next_state_index: None,
        }
    }
}

/// Ring buffer with uniform sampling.
pub struct ReplayBuffer {
    slots: Vec<Transition>,
    capacity: usize,
    head: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0);
        Self {
            slots: Vec::with_capacity(capacity.min(1 << 20)),
            capacity,
            head: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    pub fn push(&mut self, t: Transition) {
        if self.slots.len() < self.capacity {
            self.slots.push(t);
        } else {
            self.slots[self.head] = t;
            self.head = (self.head + 1) % self.capacity;
        }
    }

    /// Uniform sample of `count` indices (with replacement).
    pub fn sample<'a>(&'a self, count: usize, rng: &mut ChaCha8Rng) -> Vec<&'a Transition> {
        assert!(count <= self.len(), "batch larger than buffer occupancy");
        (0..count)
            .map(|_| &self.slots[rng.random_range(0..self.slots.len())])
            .collect()
    }
}

/// Shaped reward for the reward-shaping baseline:
/// `r − w·‖pre − executed‖₂`.
pub fn shape_reward(reward: f64, pre: &[f64], executed: &[f64], weight: f64) -> f64 {
    reward - weight * linalg::dist2(pre, executed)
}

#[derive(Debug, Clone)]
pub struct ActionOutcome {
    pub executed: Vec<f64>,
    pub pre: Vec<f64>,
    pub pre_violation: bool,
}

struct ActorCritic {
    actor: DenseNet<f64>,
    actor_target: DenseNet<f64>,
    critic: DenseNet<f64>,
    critic_target: DenseNet<f64>,
    actor_adam: AdamState<f64>,
    critic_adam: AdamState<f64>,
}

struct TabularActor {
    table: Vec<Vec<f64>>,
    critic: DenseNet<f64>,
    critic_target: DenseNet<f64>,
    critic_adam: AdamState<f64>,
    num_states: usize,
}

enum Policy {
    Neural(ActorCritic),
    Tabular(TabularActor),
}

pub struct Agent {
    pub cfg: AgentConfig,
    policy: Policy,
    pub buffer: ReplayBuffer,
    state_dim: usize,
    action_dim: usize,
}

impl Agent {
    pub fn new(
        cfg: AgentConfig,
        env: &dyn Environment,
        rng: &mut ChaCha8Rng,
    ) -> Result<Self, AgentError> {
        cfg.validate()?;
        let state_dim = env.state_dim();
        let action_dim = env.action_dim();
        let buffer = ReplayBuffer::new(cfg.buffer_capacity);
        let policy = match cfg.algo {
            Algo::FwpoTabular => {
                let num_states = env.tabular_state_count().ok_or(AgentError::NotTabular)?;
                let mut critic_sizes = vec![num_states + action_dim];
                critic_sizes.extend_from_slice(&cfg.hidden);
                critic_sizes.push(1);
                let critic = DenseNet::init(&critic_sizes, OutputActivation::Identity, rng);
                let critic_target = critic.clone();
                let critic_adam = AdamState::new(&critic);
                // Tabular mode requires a state-independent constraint set;
                // probe it at the zero observation.
                let probe = vec![0.0; state_dim];
                let anchor = env.constraint_of(&probe).feasible_point()?;
                let table = vec![anchor; num_states];
                Policy::Tabular(TabularActor {
                    table,
                    critic,
                    critic_target,
                    critic_adam,
                    num_states,
                })
            }
            _ => {
                let mut actor_sizes = vec![state_dim];
                actor_sizes.extend_from_slice(&cfg.hidden);
                actor_sizes.push(action_dim);
                let actor = DenseNet::init(&actor_sizes, cfg.actor_output, rng);
                let mut critic_sizes = vec![state_dim + action_dim];
                critic_sizes.extend_from_slice(&cfg.hidden);
                critic_sizes.push(1);
                let critic = DenseNet::init(&critic_sizes, OutputActivation::Identity, rng);
                let actor_target = actor.clone();
                let critic_target = critic.clone();
                let actor_adam = AdamState::new(&actor);
                let critic_adam = AdamState::new(&critic);
                Policy::Neural(ActorCritic {
                    actor,
                    actor_target,
                    critic,
                    critic_target,
                    actor_adam,
                    critic_adam,
                })
            }
        };
        Ok(Self {
            cfg,
            policy,
            buffer,
            state_dim,
            action_dim,
        })
    }

    pub fn action_dim(&self) -> usize {
        self.action_dim
    }

    /// Raw (pre-projection) policy output at a state.
    pub fn raw_action(&self, env: &dyn Environment, state: &[f64]) -> Result<Vec<f64>, AgentError> {
        match &self.policy {
            Policy::Neural(ac) => Ok(ac.actor.forward(state)),
            Policy::Tabular(t) => {
                let idx = env
                    .tabular_state_index(state)
                    .ok_or(AgentError::NotTabular)?;
                Ok(t.table[idx].clone())
            }
        }
    }

    /// Selects an action: raw policy output plus exploration noise, projected
    /// onto the state's feasible set. The pre-projection action and its
    /// feasibility verdict are returned for violation accounting.
    pub fn act(
        &self,
        env: &dyn Environment,
        state: &[f64],
        explore: bool,
        rng: &mut ChaCha8Rng,
    ) -> Result<ActionOutcome, AgentError> {
        let cset = env.constraint_of(state);
        let pre = match &self.policy {
            Policy::Neural(ac) => {
                let mut a = ac.actor.forward(state);
                if explore && self.cfg.noise_sigma > 0.0 {
                    for ai in a.iter_mut() {
                        let n: f64 = StandardNormal.sample(rng);
                        *ai += self.cfg.noise_sigma * n;
                    }
                }
                a
            }
            Policy::Tabular(t) => {
                let idx = env
                    .tabular_state_index(state)
                    .ok_or(AgentError::NotTabular)?;
                if explore && rng.random_range(0.0..1.0) < self.cfg.epsilon {
                    let (lo, hi) = env.action_bounds();
                    lo.iter()
                        .zip(&hi)
                        .map(|(l, h)| rng.random_range(*l..=*h))
                        .collect()
                } else {
                    t.table[idx].clone()
                }
            }
        };
        finish_action(&cset, pre)
    }

    /// Temporal-difference targets for a batch; exposed for tests.
    pub fn td_targets(&self, batch: &[&Transition]) -> Vec<f64> {
        batch
            .iter()
            .map(|t| {
                if t.done {
                    t.reward
                } else {
                    let q_next = match &self.policy {
                        Policy::Neural(ac) => {
                            let a_next = ac.actor_target.forward(&t.next_state);
                            ac.critic_target.forward(&concat(&t.next_state, &a_next))[0]
                        }
                        Policy::Tabular(tab) => {
                            // The table is its own target policy.
                            let idx = t.next_state_index.expect("tabular transition");
                            let a_next = &tab.table[idx];
                            tab.critic_target.forward(&tab_input(tab, idx, a_next))[0]
                        }
                    };
                    t.reward + self.cfg.gamma * q_next
                }
            })
            .collect()
    }

    /// One Adam step on the mean squared TD error; returns the pre-step loss.
    pub fn critic_update(&mut self, batch: &[&Transition]) -> f64 {
        assert!(!batch.is_empty());
        let targets = self.td_targets(batch);
        let scale = 1.0 / batch.len() as f64;
        match &mut self.policy {
            Policy::Neural(ac) => {
                let mut total = Gradients::zeros_like(&ac.critic);
                let mut loss = 0.0;
                for (t, y) in batch.iter().zip(&targets) {
                    let input = concat(&t.state, &t.action);
                    let q = ac.critic.forward(&input)[0];
                    let err = q - y;
                    loss += err * err;
                    let g = ac.critic.backward(&input, &[2.0 * err]);
                    total.accumulate(&g, scale);
                }
                adam_step(
                    &mut ac.critic,
                    &total,
                    &mut ac.critic_adam,
                    self.cfg.critic_lr,
                );
                loss * scale
            }
            Policy::Tabular(tab) => {
                let mut total = Gradients::zeros_like(&tab.critic);
                let mut loss = 0.0;
                for (t, y) in batch.iter().zip(&targets) {
                    let idx = t.state_index.expect("tabular transition");
                    let input = tab_input(tab, idx, &t.action);
                    let q = tab.critic.forward(&input)[0];
                    let err = q - y;
                    loss += err * err;
                    let g = tab.critic.backward(&input, &[2.0 * err]);
                    total.accumulate(&g, scale);
                }
                adam_step(
                    &mut tab.critic,
                    &total,
                    &mut tab.critic_adam,
                    self.cfg.critic_lr,
                );
                loss * scale
            }
        }
    }

    /// Reference actions for a batch of states: project the actor output,
    /// then advance it toward the linear-maximization point of the critic's
    /// action gradient with rate `fw_lr`. Constants with respect to the actor
    /// parameters by construction.
    pub fn nfwpo_reference_actions(
        &self,
        env: &dyn Environment,
        states: &[&[f64]],
    ) -> Result<Vec<Vec<f64>>, AgentError> {
        let Policy::Neural(ac) = &self.policy else {
            return Err(AgentError::InvalidConfig(
                "reference actions need a neural actor".into(),
            ));
        };
        let alpha = self.cfg.fw_lr;
        let mut refs = Vec::with_capacity(states.len());
        for (index, s) in states.iter().enumerate() {
            let cset = env.constraint_of(s);
            let raw = ac.actor.forward(s);
            let per_state = (|| -> Result<Vec<f64>, GeometryError> {
                let x = cset.project(&raw)?;
                let dq = ac.critic.backward(&concat(s, &x), &[1.0]);
                let grad_a = &dq.input[self.state_dim..];
                let c = cset.lmo(grad_a)?;
                Ok(x.iter()
                    .zip(&c)
                    .map(|(xi, ci)| xi + alpha * (ci - xi))
                    .collect())
            })();
            match per_state {
                Ok(r) => refs.push(r),
                Err(source) => return Err(AgentError::BatchState { index, source }),
            }
        }
        Ok(refs)
    }

    /// Actor regression onto reference actions: summed squared error over the
    /// batch, one Adam step. Returns the pre-step loss.
    pub fn nfwpo_actor_update(
        &mut self,
        env: &dyn Environment,
        batch: &[&Transition],
    ) -> Result<f64, AgentError> {
        let states: Vec<&[f64]> = batch.iter().map(|t| t.state.as_slice()).collect();
        let refs = self.nfwpo_reference_actions(env, &states)?;
        let Policy::Neural(ac) = &mut self.policy else {
            unreachable!("checked by nfwpo_reference_actions");
        };
        let mut total = Gradients::zeros_like(&ac.actor);
        let mut loss = 0.0;
        for (s, target) in states.iter().zip(&refs) {
            let out = ac.actor.forward(s);
            let upstream: Vec<f64> = out.iter().zip(target).map(|(o, t)| 2.0 * (o - t)).collect();
            loss += out
                .iter()
                .zip(target)
                .map(|(o, t)| (o - t) * (o - t))
                .sum::<f64>();
            let g = ac.actor.backward(s, &upstream);
            total.accumulate(&g, 1.0);
        }
        adam_step(&mut ac.actor, &total, &mut ac.actor_adam, self.cfg.actor_lr);
        Ok(loss)
    }

    /// Sample-based deterministic policy-gradient ascent step, evaluated at
    /// the raw (unprojected) actor output.
    pub fn ddpg_actor_update(&mut self, batch: &[&Transition]) {
        let Policy::Neural(ac) = &mut self.policy else {
            return;
        };
        let scale = -1.0 / batch.len() as f64; // ascent via negated descent
        let mut total = Gradients::zeros_like(&ac.actor);
        for t in batch {
            let a = ac.actor.forward(&t.state);
            let dq = ac.critic.backward(&concat(&t.state, &a), &[1.0]);
            let grad_a = &dq.input[self.state_dim..];
            let g = ac.actor.backward(&t.state, grad_a);
            total.accumulate(&g, scale);
        }
        adam_step(&mut ac.actor, &total, &mut ac.actor_adam, self.cfg.actor_lr);
    }

    /// State-wise Frank-Wolfe update of the policy table against the critic's
    /// action gradient; each updated row stays a convex combination of
    /// feasible points.
    pub fn fwpo_tabular_update(
        &mut self,
        env: &dyn Environment,
        batch: &[&Transition],
    ) -> Result<(), AgentError> {
        let Policy::Tabular(tab) = &mut self.policy else {
            return Err(AgentError::InvalidConfig(
                "tabular update needs a tabular policy".into(),
            ));
        };
        let alpha = self.cfg.fw_lr;
        for (index, t) in batch.iter().enumerate() {
            let idx = t.state_index.ok_or(AgentError::NotTabular)?;
            let cset = env.constraint_of(&t.state);
            let row = tab.table[idx].clone();
            let dq = tab.critic.backward(&tab_input(tab, idx, &row), &[1.0]);
            let grad_a = &dq.input[tab.num_states..];
            match cset.lmo(grad_a) {
                Ok(c) => {
                    for (xi, ci) in tab.table[idx].iter_mut().zip(&c) {
                        *xi += alpha * (ci - *xi);
                    }
                }
                Err(source) => return Err(AgentError::BatchState { index, source }),
            }
        }
        Ok(())
    }

    fn soft_update_targets(&mut self) {
        let tau = self.cfg.tau;
        match &mut self.policy {
            Policy::Neural(ac) => {
                ac.actor_target.soft_update_from(&ac.actor, tau);
                ac.critic_target.soft_update_from(&ac.critic, tau);
            }
            Policy::Tabular(tab) => {
                tab.critic_target.soft_update_from(&tab.critic, tau);
            }
        }
    }

    /// One environment interaction plus the scheduled updates: store the
    /// transition, one critic step per training step, one actor step per
    /// `actor_update_period`, Polyak target updates every training step.
    /// During warmup the behavior policy is uniform over the enclosing action
    /// box (projected), and no parameters change.
    pub fn train_step(
        &mut self,
        env: &mut dyn Environment,
        state: &[f64],
        global_step: usize,
        exploration: &mut ChaCha8Rng,
        replay: &mut ChaCha8Rng,
    ) -> Result<Transition, AgentError> {
        let outcome = if global_step < self.cfg.warmup_steps {
            let (lo, hi) = env.action_bounds();
            let pre: Vec<f64> = lo
                .iter()
                .zip(&hi)
                .map(|(l, h)| exploration.random_range(*l..=*h))
                .collect();
            finish_action(&env.constraint_of(state), pre)?
        } else {
            self.act(env, state, true, exploration)?
        };

        let step = env.step(&outcome.executed)?;
        let stored_reward = if self.cfg.algo == Algo::DdpgShaping {
            shape_reward(
                step.reward,
                &outcome.pre,
                &outcome.executed,
                self.cfg.shaping_weight,
            )
        } else {
            step.reward
        };
        let (state_index, next_state_index) = if self.cfg.algo == Algo::FwpoTabular {
            (
                Some(
                    env.tabular_state_index(state)
                        .ok_or(AgentError::NotTabular)?,
                ),
                Some(
                    env.tabular_state_index(&step.next_state)
                        .ok_or(AgentError::NotTabular)?,
                ),
            )
        } else {
            (None, None)
        };
        let transition = Transition {
            state: state.to_vec(),
            action: outcome.executed,
            reward: stored_reward,
            next_state: step.next_state,
            done: step.done,
            pre_violation: outcome.pre_violation,
            state_index,
            next_state_index,
        };
        self.buffer.push(transition.clone());

        if global_step >= self.cfg.warmup_steps && self.buffer.len() >= self.cfg.batch_size {
            let batch = self.buffer.sample(self.cfg.batch_size, replay);
            let batch_owned: Vec<Transition> = batch.into_iter().cloned().collect();
            let refs: Vec<&Transition> = batch_owned.iter().collect();
            self.critic_update(&refs);
            if global_step % self.cfg.actor_update_period == 0 {
                match self.cfg.algo {
                    Algo::Nfwpo => {
                        self.nfwpo_actor_update(env, &refs)?;
                    }
                    Algo::DdpgProjection | Algo::DdpgShaping => {
                        self.ddpg_actor_update(&refs);
                    }
                    Algo::FwpoTabular => {
                        self.fwpo_tabular_update(env, &refs)?;
                    }
                }
            }
            self.soft_update_targets();
        }
        Ok(transition)
    }

    /// Serializes the policy (actor network or policy table) and critic.
    pub fn save_policy(&self, dir: &std::path::Path) -> std::io::Result<()> {
        match &self.policy {
            Policy::Neural(ac) => {
                ac.actor.save_file(&dir.join("actor.net"))?;
                ac.critic.save_file(&dir.join("critic.net"))
            }
            Policy::Tabular(tab) => {
                use std::io::Write;
                let mut f =
                    std::io::BufWriter::new(std::fs::File::create(dir.join("policy_table.txt"))?);
                writeln!(f, "table v1 {} {}", tab.num_states, self.action_dim)?;
                for row in &tab.table {
                    let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
                    writeln!(f, "{}", cells.join(" "))?;
                }
                tab.critic.save_file(&dir.join("critic.net"))
            }
        }
    }

    /// Direct access to the actor network (neural policies).
    pub fn actor(&self) -> Option<&DenseNet<f64>> {
        match &self.policy {
            Policy::Neural(ac) => Some(&ac.actor),
            Policy::Tabular(_) => None,
        }
    }

    #[cfg(test)]
    fn actor_critic_mut(&mut self) -> &mut ActorCritic {
        match &mut self.policy {
            Policy::Neural(ac) => ac,
            Policy::Tabular(_) => panic!("not a neural agent"),
        }
    }
}

fn finish_action(cset: &ConstraintSet<f64>, pre: Vec<f64>) -> Result<ActionOutcome, AgentError> {
    let pre_violation = !cset.contains(&pre, DEFAULT_TOL)?;
    let executed = if pre_violation {
        cset.project(&pre)?
    } else {
        pre.clone()
    };
    Ok(ActionOutcome {
        executed,
        pre,
        pre_violation,
    })
}

fn concat(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut v = Vec::with_capacity(a.len() + b.len());
    v.extend_from_slice(a);
    v.extend_from_slice(b);
    v
}

fn tab_input(tab: &TabularActor, idx: usize, action: &[f64]) -> Vec<f64> {
    let mut v = vec![0.0; tab.num_states];
    v[idx] = 1.0;
    v.extend_from_slice(action);
    v
}

#[cfg(test)]
mod tests;
