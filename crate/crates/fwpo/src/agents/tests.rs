use super::*;
use crate::envs::Step;
use rand::SeedableRng;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Minimal environment with a fixed constraint set and constant reward.
struct StubEnv {
    cset: ConstraintSet<f64>,
    state_dim: usize,
    reward: f64,
    episode_length: usize,
    t: usize,
}

impl StubEnv {
    fn new(cset: ConstraintSet<f64>, state_dim: usize) -> Self {
        Self {
            cset,
            state_dim,
            reward: 0.0,
            episode_length: 100,
            t: 0,
        }
    }
}

impl Environment for StubEnv {
    fn state_dim(&self) -> usize {
        self.state_dim
    }
    fn action_dim(&self) -> usize {
        self.cset.dim()
    }
    fn episode_length(&self) -> usize {
        self.episode_length
    }
    fn constraint_of(&self, _state: &[f64]) -> ConstraintSet<f64> {
        self.cset.clone()
    }
    fn reset(&mut self, _seed: u64) -> Vec<f64> {
        self.t = 0;
        vec![0.0; self.state_dim]
    }
    fn step(&mut self, action: &[f64]) -> Result<Step, EnvError> {
        assert!(self.cset.contains(action, 1e-6).unwrap());
        self.t += 1;
        Ok(Step {
            next_state: vec![0.0; self.state_dim],
            reward: self.reward,
            done: self.t % self.episode_length == 0,
        })
    }
    fn action_bounds(&self) -> (Vec<f64>, Vec<f64>) {
        self.cset.enclosing_box().unwrap()
    }
}

fn unit_box(dim: usize) -> ConstraintSet<f64> {
    ConstraintSet::box_set(vec![0.0; dim], vec![1.0; dim]).unwrap()
}

fn small_cfg(algo: Algo) -> AgentConfig {
    let mut cfg = AgentConfig::for_algo(algo);
    cfg.hidden = vec![8];
    cfg.batch_size = 4;
    cfg.warmup_steps = 8;
    cfg.buffer_capacity = 256;
    cfg.actor_output = OutputActivation::Identity;
    cfg
}

/// Agent whose actor constantly outputs `value` and whose critic is
/// `Q(s, a) = Σ a` (single linear layers).
fn linear_agent(env: &StubEnv, value: f64) -> Agent {
    let mut cfg = small_cfg(Algo::Nfwpo);
    cfg.hidden = vec![];
    let mut agent = Agent::new(cfg, env, &mut rng(0)).unwrap();
    let dim = env.action_dim();
    let sd = env.state_dim();
    {
        let ac = agent.actor_critic_mut();
        ac.actor = DenseNet::zeroed(&[sd, dim], OutputActivation::Identity);
        for i in 0..dim {
            let (_, b) = ac.actor.layer_mut(0);
            b[i] = value;
        }
        ac.actor_target = ac.actor.clone();
        ac.critic = DenseNet::zeroed(&[sd + dim, 1], OutputActivation::Identity);
        {
            let (w, _) = ac.critic.layer_mut(0);
            for j in sd..sd + dim {
                w[(0, j)] = 1.0;
            }
        }
        ac.critic_target = ac.critic.clone();
        ac.actor_adam = AdamState::new(&ac.actor);
        ac.critic_adam = AdamState::new(&ac.critic);
    }
    agent
}

#[test]
fn act_feasible_output_passes_through() {
    let env = StubEnv::new(unit_box(2), 3);
    let mut agent = linear_agent(&env, 0.5);
    agent.cfg.noise_sigma = 0.0;
    let out = agent.act(&env, &[0.0; 3], true, &mut rng(1)).unwrap();
    assert_eq!(out.pre, vec![0.5, 0.5]);
    assert_eq!(out.executed, out.pre);
    assert!(!out.pre_violation);
}

#[test]
fn act_is_deterministic_without_noise() {
    let env = StubEnv::new(unit_box(2), 3);
    let mut agent = Agent::new(small_cfg(Algo::Nfwpo), &env, &mut rng(2)).unwrap();
    agent.cfg.noise_sigma = 0.0;
    let a = agent
        .act(&env, &[0.1, 0.2, 0.3], true, &mut rng(3))
        .unwrap();
    let b = agent
        .act(&env, &[0.1, 0.2, 0.3], true, &mut rng(4))
        .unwrap();
    assert_eq!(a.executed, b.executed);
}

#[test]
fn act_clips_infeasible_output() {
    let env = StubEnv::new(unit_box(1), 2);
    let mut agent = linear_agent(&env, -0.3);
    agent.cfg.noise_sigma = 0.0;
    let out = agent.act(&env, &[0.0; 2], false, &mut rng(5)).unwrap();
    assert_eq!(out.pre, vec![-0.3]);
    assert_eq!(out.executed, vec![0.0]);
    assert!(out.pre_violation);
}

#[test]
fn critic_update_zero_loss_fixed_point() {
    // γ = 0, constant reward c, critic already outputs c: loss 0 and no
    // parameter motion (Adam on an exactly zero gradient).
    let env = StubEnv::new(unit_box(1), 1);
    let mut agent = linear_agent(&env, 0.5);
    agent.cfg.gamma = 0.0;
    let c = 0.7;
    {
        let ac = agent.actor_critic_mut();
        ac.critic = DenseNet::zeroed(&[2, 1], OutputActivation::Identity);
        let (_, b) = ac.critic.layer_mut(0);
        b[0] = c;
        ac.critic_target = ac.critic.clone();
        ac.critic_adam = AdamState::new(&ac.critic);
    }
    // done = true transitions make the target exactly r = c.
    let t = Transition::new(vec![0.3], vec![0.2], c, vec![0.0], true, false);
    let before = agent.actor_critic_mut().critic.flat_params();
    let loss = agent.critic_update(&[&t]);
    assert_eq!(loss, 0.0);
    assert_eq!(agent.actor_critic_mut().critic.flat_params(), before);
}

#[test]
fn td_targets_drop_bootstrap_when_done() {
    let env = StubEnv::new(unit_box(1), 1);
    let mut agent = linear_agent(&env, 0.5);
    agent.cfg.gamma = 0.9;
    let done = Transition::new(vec![0.0], vec![0.9], 1.25, vec![0.0], true, false);
    let live = Transition::new(vec![0.0], vec![0.9], 1.25, vec![0.0], false, false);
    let targets = agent.td_targets(&[&done, &live]);
    assert_eq!(targets[0], 1.25);
    // Critic target is Σa; target actor outputs 0.5.
    assert!((targets[1] - (1.25 + 0.9 * 0.5)).abs() < 1e-12);
}

#[test]
fn critic_gradient_matches_hand_derivation() {
    // One transition, linear critic Q = w_s·s + w_a·a + b: the update must
    // equal Adam applied to ∇ = 2(Q − y)·(s, a, 1)/|B|.
    let env = StubEnv::new(unit_box(1), 1);
    let mut agent = linear_agent(&env, 0.5);
    agent.cfg.gamma = 0.9;
    let (s, a, r) = (0.4, 0.6, 0.3);
    let t = Transition::new(vec![s], vec![a], r, vec![0.2], true, false);

    let ac = agent.actor_critic_mut();
    let q = ac.critic.forward(&[s, a])[0];
    let err = 2.0 * (q - r);
    let mut expected = ac.critic.clone();
    let mut expected_adam = AdamState::new(&expected);
    let mut hand = Gradients::zeros_like(&expected);
    hand.w[0][(0, 0)] = err * s;
    hand.w[0][(0, 1)] = err * a;
    hand.b[0][0] = err;
    adam_step(
        &mut expected,
        &hand,
        &mut expected_adam,
        agent.cfg.critic_lr,
    );

    agent.critic_update(&[&t]);
    let got = agent.actor_critic_mut().critic.flat_params();
    for (g, e) in got.iter().zip(expected.flat_params()) {
        assert!((g - e).abs() < 1e-15);
    }
}

#[test]
fn nfwpo_reference_action_hand_case() {
    // Box [0, 1], π = 0.5, ∇_a Q = +1, α = 0.05 → reference 0.525.
    let env = StubEnv::new(unit_box(1), 1);
    let agent = linear_agent(&env, 0.5);
    let state = vec![0.0];
    let refs = agent.nfwpo_reference_actions(&env, &[&state]).unwrap();
    assert!((refs[0][0] - 0.525).abs() < 1e-12);
}

#[test]
fn nfwpo_alpha_zero_is_projection_fixed_point() {
    let env = StubEnv::new(unit_box(1), 1);
    let mut agent = linear_agent(&env, 0.5);
    agent.cfg.fw_lr = 0.0; // degenerate value allowed only for this formula probe
    let state = vec![0.0];
    let refs = agent.nfwpo_reference_actions(&env, &[&state]).unwrap();
    assert_eq!(refs[0], vec![0.5]);

    // Feasible outputs for the whole batch: the regression loss gradient is
    // exactly zero, so an update leaves the actor untouched.
    let before = agent.actor_critic_mut().actor.flat_params();
    let t = Transition::new(state.clone(), vec![0.5], 0.0, state, false, false);
    let loss = agent.nfwpo_actor_update(&env, &[&t]).unwrap();
    assert_eq!(loss, 0.0);
    assert_eq!(agent.actor_critic_mut().actor.flat_params(), before);
}

#[test]
fn nfwpo_zero_gradient_uses_anchor_rule() {
    // Critic ignoring actions gives ∇_a Q = 0: the reference action advances
    // toward the deterministic zero-objective point (box lower corner).
    let env = StubEnv::new(unit_box(1), 1);
    let mut agent = linear_agent(&env, 0.5);
    {
        let ac = agent.actor_critic_mut();
        ac.critic = DenseNet::zeroed(&[2, 1], OutputActivation::Identity);
    }
    let state = vec![0.0];
    let refs = agent.nfwpo_reference_actions(&env, &[&state]).unwrap();
    // x = 0.5, c = lo = 0, α = 0.05 → 0.5 + 0.05·(0 − 0.5) = 0.475.
    assert!((refs[0][0] - 0.475).abs() < 1e-12);
}

#[test]
fn nfwpo_update_matches_regression_with_constant_references() {
    // The applied update must equal Adam on Σ 2(π(s) − ã_s)∇π computed with
    // the reference actions held constant: no gradient flows through the
    // projection or the linear maximization.
    let env = StubEnv::new(unit_box(2), 3);
    let mut cfg = small_cfg(Algo::Nfwpo);
    cfg.hidden = vec![6];
    let mut agent = Agent::new(cfg, &env, &mut rng(9)).unwrap();
    let states: Vec<Vec<f64>> = (0..4).map(|k| vec![0.1 * k as f64, -0.2, 0.3]).collect();
    let state_refs: Vec<&[f64]> = states.iter().map(|s| s.as_slice()).collect();
    let refs = agent.nfwpo_reference_actions(&env, &state_refs).unwrap();

    let (mut expected, mut expected_adam) = {
        let ac = agent.actor_critic_mut();
        (ac.actor.clone(), ac.actor_adam.clone())
    };
    let mut manual = Gradients::zeros_like(&expected);
    for (s, target) in states.iter().zip(&refs) {
        let out = expected.forward(s);
        let upstream: Vec<f64> = out.iter().zip(target).map(|(o, t)| 2.0 * (o - t)).collect();
        let g = expected.backward(s, &upstream);
        manual.accumulate(&g, 1.0);
    }
    adam_step(
        &mut expected,
        &manual,
        &mut expected_adam,
        agent.cfg.actor_lr,
    );

    let batch: Vec<Transition> = states
        .iter()
        .map(|s| Transition::new(s.clone(), vec![0.5, 0.5], 0.0, s.clone(), false, false))
        .collect();
    let batch_refs: Vec<&Transition> = batch.iter().collect();
    agent.nfwpo_actor_update(&env, &batch_refs).unwrap();

    let got = agent.actor_critic_mut().actor.flat_params();
    for (g, e) in got.iter().zip(expected.flat_params()) {
        assert!((g - e).abs() < 1e-14);
    }
}

#[test]
fn ddpg_update_no_motion_on_zero_gradient() {
    let env = StubEnv::new(unit_box(1), 1);
    let mut agent = linear_agent(&env, 0.5);
    {
        let ac = agent.actor_critic_mut();
        ac.critic = DenseNet::zeroed(&[2, 1], OutputActivation::Identity);
    }
    let before = agent.actor_critic_mut().actor.flat_params();
    let t = Transition::new(vec![0.0], vec![0.5], 0.0, vec![0.0], false, false);
    agent.ddpg_actor_update(&[&t]);
    assert_eq!(agent.actor_critic_mut().actor.flat_params(), before);
}

#[test]
fn ddpg_ascent_moves_bias_by_unit_step() {
    // Linear actor π(s) = b, critic Q = a: the sample gradient is exactly 1,
    // so the first bias-corrected Adam ascent step is ≈ +lr.
    let env = StubEnv::new(unit_box(1), 1);
    let mut agent = linear_agent(&env, 0.5);
    let t = Transition::new(vec![0.0], vec![0.5], 0.0, vec![0.0], false, false);
    let before = agent.actor_critic_mut().actor.flat_params();
    agent.ddpg_actor_update(&[&t]);
    let after = agent.actor_critic_mut().actor.flat_params();
    let delta_bias = after[1] - before[1];
    assert!(
        (delta_bias - agent.cfg.actor_lr).abs() < 1e-6,
        "Δb = {delta_bias}"
    );
}

#[test]
fn shape_reward_examples() {
    assert_eq!(shape_reward(0.4, &[1.0, 2.0], &[1.0, 2.0], 3.0), 0.4);
    assert_eq!(shape_reward(0.0, &[2.0, 0.0], &[1.0, 0.0], 1.0), -1.0);
    let r = shape_reward(0.0, &[1.0, 0.0], &[0.0, 0.0], 1.0 / 7.0);
    assert!((r + 1.0 / 7.0).abs() < 1e-12);
}

#[test]
fn train_step_warmup_only_fills_buffer() {
    let mut env = StubEnv::new(unit_box(2), 3);
    let mut agent = Agent::new(small_cfg(Algo::Nfwpo), &env, &mut rng(11)).unwrap();
    let before = agent.actor_critic_mut().actor.flat_params();
    let state = env.reset(0);
    let mut er = rng(12);
    let mut rr = rng(13);
    for step in 0..agent.cfg.warmup_steps {
        let t = agent
            .train_step(&mut env, &state, step, &mut er, &mut rr)
            .unwrap();
        assert!(env.constraint_of(&state).contains(&t.action, 1e-6).unwrap());
    }
    assert_eq!(agent.buffer.len(), agent.cfg.warmup_steps);
    assert_eq!(agent.actor_critic_mut().actor.flat_params(), before);
}

#[test]
fn actor_update_period_is_respected() {
    let mut env = StubEnv::new(unit_box(2), 3);
    let mut cfg = small_cfg(Algo::DdpgProjection);
    cfg.actor_update_period = 50;
    cfg.warmup_steps = 4;
    cfg.noise_sigma = 0.1;
    let mut agent = Agent::new(cfg, &env, &mut rng(14)).unwrap();
    let state = env.reset(0);
    let mut er = rng(15);
    let mut rr = rng(16);
    let mut change_steps = Vec::new();
    for step in 0..200 {
        let before = agent.actor_critic_mut().actor.flat_params();
        agent
            .train_step(&mut env, &state, step, &mut er, &mut rr)
            .unwrap();
        if agent.actor_critic_mut().actor.flat_params() != before {
            change_steps.push(step);
        }
    }
    assert!(!change_steps.is_empty());
    assert!(change_steps.iter().all(|s| s % 50 == 0), "{change_steps:?}");
}

#[test]
fn replay_buffer_ring_overwrites_oldest() {
    let mut buf = ReplayBuffer::new(3);
    for k in 0..5 {
        buf.push(Transition::new(
            vec![k as f64],
            vec![],
            0.0,
            vec![],
            false,
            false,
        ));
    }
    assert_eq!(buf.len(), 3);
    let mut seen: Vec<f64> = buf.slots.iter().map(|t| t.state[0]).collect();
    seen.sort_by(f64::total_cmp);
    assert_eq!(seen, vec![2.0, 3.0, 4.0]);
}

#[test]
fn replay_sampling_is_uniform_chi_squared() {
    // 10⁵ draws over a 100-slot buffer; χ²₉₉ must stay below the 0.999
    // quantile 148.23.
    let mut buf = ReplayBuffer::new(100);
    for k in 0..100 {
        buf.push(Transition::new(
            vec![k as f64],
            vec![],
            0.0,
            vec![],
            false,
            false,
        ));
    }
    let mut counts = [0u64; 100];
    let mut r = rng(17);
    for _ in 0..1000 {
        for t in buf.sample(100, &mut r) {
            counts[t.state[0] as usize] += 1;
        }
    }
    let expected = 1000.0;
    let chi2: f64 = counts
        .iter()
        .map(|c| {
            let d = *c as f64 - expected;
            d * d / expected
        })
        .sum();
    assert!(chi2 < 148.23, "χ² = {chi2}");
}

#[test]
fn nfwpo_reference_actions_always_feasible() {
    // Convex combination of two feasible points stays feasible, for random
    // actors over assorted constraint shapes.
    let ball = ConstraintSet::l2_ball(vec![0.0, 0.0], 0.3).unwrap();
    let wedge = {
        let halves = ConstraintSet::halfspaces(
            crate::linalg::Matrix::from_rows(&[vec![1.0, 1.0], vec![-1.0, -1.0]]),
            vec![0.1, 0.1],
        )
        .unwrap();
        ConstraintSet::intersection(
            vec![
                halves,
                ConstraintSet::l2_ball(vec![0.0, 0.0], 0.02f64.sqrt()).unwrap(),
            ],
            vec![0.0, 0.0],
        )
        .unwrap()
    };
    for (i, cset) in [unit_box(2), ball, wedge].into_iter().enumerate() {
        let env = StubEnv::new(cset.clone(), 3);
        let mut r = rng(100 + i as u64);
        for trial in 0..10 {
            let agent = Agent::new(small_cfg(Algo::Nfwpo), &env, &mut r).unwrap();
            let state: Vec<f64> = (0..3).map(|_| r.random_range(-1.0..1.0)).collect();
            let refs = agent.nfwpo_reference_actions(&env, &[&state]).unwrap();
            assert!(
                cset.contains(&refs[0], 1e-6).unwrap(),
                "set {i} trial {trial}: reference action {refs:?} infeasible"
            );
        }
    }
}

#[test]
fn config_validation_rejects_bad_values() {
    let mut cfg = AgentConfig::for_algo(Algo::Nfwpo);
    cfg.fw_lr = 0.0;
    assert!(cfg.validate().is_err());
    let mut cfg = AgentConfig::for_algo(Algo::Nfwpo);
    cfg.noise_sigma = -0.1;
    assert!(cfg.validate().is_err());
    let mut cfg = AgentConfig::for_algo(Algo::Nfwpo);
    cfg.batch_size = 0;
    assert!(cfg.validate().is_err());
    assert!(AgentConfig::for_algo(Algo::DdpgShaping).validate().is_ok());
}
