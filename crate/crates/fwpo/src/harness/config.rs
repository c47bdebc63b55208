//! Experiment configuration: a flat-to-two-level `key = value` text format
//! with `env.*`, `algo.*`, and `train.*` sections. Unknown keys are hard
//! errors; silent hyperparameter typos are how reproductions die.

use crate::agents::{AgentConfig, Algo};
use crate::envs::{
    BikeShareEnv, BssConfig, Environment, FlowSpec, NetUtilConfig, NetUtilEnv, PointMassConfig,
    PointMassEnv, PointMassVariant,
};
use crate::neural::OutputActivation;
use std::collections::BTreeMap;
use std::path::PathBuf;

use super::HarnessError;

#[derive(Debug, Clone)]
pub enum EnvSpec {
    Bss(BssConfig),
    NetUtil(NetUtilConfig),
    PointMass(PointMassConfig),
}

impl EnvSpec {
    pub fn by_name(name: &str) -> Result<Self, HarnessError> {
        match name {
            "bss" => Ok(Self::Bss(BssConfig::default())),
            "netutil" => Ok(Self::NetUtil(NetUtilConfig::default())),
            "pointmass_reacher" => Ok(Self::PointMass(PointMassConfig::reacher())),
            "pointmass_power" => Ok(Self::PointMass(PointMassConfig::power())),
            other => Err(HarnessError::Config(format!("unknown env name '{other}'"))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Bss(_) => "bss",
            Self::NetUtil(_) => "netutil",
            Self::PointMass(c) => match c.variant {
                PointMassVariant::Reacher => "pointmass_reacher",
                PointMassVariant::Power { .. } => "pointmass_power",
            },
        }
    }

    pub fn build(&self) -> Result<Box<dyn Environment>, HarnessError> {
        let env: Box<dyn Environment> = match self {
            Self::Bss(c) => Box::new(BikeShareEnv::new(c.clone()).map_err(runtime)?),
            Self::NetUtil(c) => Box::new(NetUtilEnv::new(c.clone()).map_err(runtime)?),
            Self::PointMass(c) => Box::new(PointMassEnv::new(c.clone()).map_err(runtime)?),
        };
        Ok(env)
    }
}

fn runtime<E: std::fmt::Display>(e: E) -> HarnessError {
    HarnessError::Runtime(e.to_string())
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub env: EnvSpec,
    pub algo: AgentConfig,
    pub total_steps: usize,
    pub eval_every: usize,
    pub eval_episodes: usize,
    pub seeds: Vec<u64>,
    pub out_dir: PathBuf,
    pub record_wall_time: bool,
    pub step_log: bool,
    pub trajectory_log: bool,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), HarnessError> {
        self.algo
            .validate()
            .map_err(|e| HarnessError::Config(e.to_string()))?;
        if self.total_steps < self.algo.warmup_steps {
            return Err(HarnessError::Config(
                "train.total_steps must cover the warmup".into(),
            ));
        }
        if self.eval_episodes == 0 {
            return Err(HarnessError::Config(
                "train.eval_episodes must be at least 1".into(),
            ));
        }
        if self.eval_every == 0 || self.eval_every > self.total_steps {
            return Err(HarnessError::Config(
                "train.eval_every must be positive and at most train.total_steps".into(),
            ));
        }
        if self.seeds.is_empty() {
            return Err(HarnessError::Config("train.seeds must be nonempty".into()));
        }
        Ok(())
    }

    /// Flat key/value view of every resolved setting, for the run manifest.
    pub fn manifest_entries(&self) -> BTreeMap<String, String> {
        let mut m = BTreeMap::new();
        m.insert("env.name".into(), self.env.name().to_string());
        match &self.env {
            EnvSpec::Bss(c) => {
                m.insert("env.stations".into(), c.stations.to_string());
                m.insert("env.bikes".into(), c.bikes.to_string());
                m.insert("env.capacity".into(), c.capacity.to_string());
                m.insert("env.w_move".into(), c.w_move.to_string());
                m.insert("env.w_lost".into(), c.w_lost.to_string());
                m.insert("env.w_over".into(), c.w_over.to_string());
                m.insert("env.demand_lo".into(), c.demand_lo.to_string());
                m.insert("env.demand_hi".into(), c.demand_hi.to_string());
                m.insert("env.episode_length".into(), c.episode_length.to_string());
            }
            EnvSpec::NetUtil(c) => {
                m.insert("env.rate_bound".into(), c.rate_bound.to_string());
                m.insert("env.episode_length".into(), c.episode_length.to_string());
                m.insert("env.phases".into(), c.phases.to_string());
                m.insert("env.edges".into(), c.edges.len().to_string());
                m.insert("env.flows".into(), c.flows.len().to_string());
            }
            EnvSpec::PointMass(c) => {
                m.insert("env.dt".into(), c.dt.to_string());
                m.insert("env.friction".into(), c.friction.to_string());
                m.insert("env.dim".into(), c.dim.to_string());
                m.insert("env.action_bound".into(), c.action_bound.to_string());
                m.insert("env.goal_radius".into(), c.goal_radius.to_string());
                m.insert("env.episode_length".into(), c.episode_length.to_string());
                if let PointMassVariant::Power { budget } = c.variant {
                    m.insert("env.power_budget".into(), budget.to_string());
                }
            }
        }
        let a = &self.algo;
        m.insert("algo.name".into(), a.algo.name().to_string());
        m.insert("algo.fw_lr".into(), a.fw_lr.to_string());
        m.insert("algo.actor_lr".into(), a.actor_lr.to_string());
        m.insert("algo.critic_lr".into(), a.critic_lr.to_string());
        m.insert("algo.tau".into(), a.tau.to_string());
        m.insert("algo.noise_sigma".into(), a.noise_sigma.to_string());
        m.insert("algo.batch_size".into(), a.batch_size.to_string());
        m.insert("algo.gamma".into(), a.gamma.to_string());
        m.insert("algo.shaping_weight".into(), a.shaping_weight.to_string());
        m.insert("algo.warmup_steps".into(), a.warmup_steps.to_string());
        m.insert(
            "algo.actor_update_period".into(),
            a.actor_update_period.to_string(),
        );
        m.insert(
            "algo.hidden".into(),
            a.hidden
                .iter()
                .map(|h| h.to_string())
                .collect::<Vec<_>>()
                .join(","),
        );
        m.insert(
            "algo.actor_output".into(),
            match a.actor_output {
                OutputActivation::Identity => "identity",
                OutputActivation::Relu => "relu",
                OutputActivation::Tanh => "tanh",
            }
            .to_string(),
        );
        m.insert("algo.buffer_capacity".into(), a.buffer_capacity.to_string());
        m.insert("algo.epsilon".into(), a.epsilon.to_string());
        m.insert("train.total_steps".into(), self.total_steps.to_string());
        m.insert("train.eval_every".into(), self.eval_every.to_string());
        m.insert("train.eval_episodes".into(), self.eval_episodes.to_string());
        m.insert(
            "train.seeds".into(),
            self.seeds
                .iter()
                .map(|s| s.to_string())
                .collect::<Vec<_>>()
                .join(","),
        );
        m.insert("train.out_dir".into(), self.out_dir.display().to_string());
        m.insert(
            "train.record_wall_time".into(),
            self.record_wall_time.to_string(),
        );
        m.insert("train.step_log".into(), self.step_log.to_string());
        m.insert(
            "train.trajectory_log".into(),
            self.trajectory_log.to_string(),
        );
        m
    }
}

/// Parses the textual config format. `# comments` and blank lines are
/// skipped; every other line must be `key = value` with a known key.
pub fn parse_config(text: &str) -> Result<ExperimentConfig, HarnessError> {
    let mut pairs: Vec<(String, String)> = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(HarnessError::Config(format!(
                "line {}: expected 'key = value', got '{line}'",
                lineno + 1
            )));
        };
        pairs.push((key.trim().to_string(), value.trim().to_string()));
    }

    let get = |key: &str| -> Option<&str> {
        pairs
            .iter()
            .rev()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    };

    let env_name = get("env.name")
        .ok_or_else(|| HarnessError::Config("missing required key env.name".into()))?;
    let mut env = EnvSpec::by_name(env_name)?;
    let algo_name = get("algo.name")
        .ok_or_else(|| HarnessError::Config("missing required key algo.name".into()))?;
    let algo_tag = Algo::from_name(algo_name)
        .ok_or_else(|| HarnessError::Config(format!("unknown algo name '{algo_name}'")))?;
    let mut algo = default_agent_config(algo_tag, &env);

    let mut total_steps: usize = 20_000;
    let mut eval_every: usize = 1_000;
    let mut eval_episodes: usize = 10;
    let mut seeds: Vec<u64> = vec![0, 1, 2, 3, 4];
    let mut out_dir = PathBuf::from("runs");
    let mut record_wall_time = false;
    let mut step_log = false;
    let mut trajectory_log = false;

    for (key, value) in &pairs {
        let err = |msg: String| HarnessError::Config(format!("key '{key}': {msg}"));
        let bad_value = |t: &str| err(format!("expected {t}, got '{value}'"));
        match key.as_str() {
            "env.name" | "algo.name" => {}
            // Environment keys.
            "env.stations" => with_bss(&mut env, key, |c| {
                c.stations = parse(value)?;
                Ok(())
            })?,
            "env.bikes" => with_bss(&mut env, key, |c| {
                c.bikes = parse(value)?;
                Ok(())
            })?,
            "env.capacity" => with_bss(&mut env, key, |c| {
                c.capacity = parse(value)?;
                Ok(())
            })?,
            "env.w_move" => with_bss(&mut env, key, |c| {
                c.w_move = parse(value)?;
                Ok(())
            })?,
            "env.w_lost" => with_bss(&mut env, key, |c| {
                c.w_lost = parse(value)?;
                Ok(())
            })?,
            "env.w_over" => with_bss(&mut env, key, |c| {
                c.w_over = parse(value)?;
                Ok(())
            })?,
            "env.demand_lo" => with_bss(&mut env, key, |c| {
                c.demand_lo = parse(value)?;
                Ok(())
            })?,
            "env.demand_hi" => with_bss(&mut env, key, |c| {
                c.demand_hi = parse(value)?;
                Ok(())
            })?,
            "env.episode_length" => match &mut env {
                EnvSpec::Bss(c) => c.episode_length = parse(value)?,
                EnvSpec::NetUtil(c) => c.episode_length = parse(value)?,
                EnvSpec::PointMass(c) => c.episode_length = parse(value)?,
            },
            "env.rate_bound" => with_netutil(&mut env, key, |c| {
                c.rate_bound = parse(value)?;
                Ok(())
            })?,
            "env.phases" => with_netutil(&mut env, key, |c| {
                c.phases = parse(value)?;
                Ok(())
            })?,
            "env.link_capacity" => with_netutil(&mut env, key, |c| {
                let cap: f64 = parse(value)?;
                c.capacities = vec![cap; c.edges.len()];
                Ok(())
            })?,
            "env.base_latency" => with_netutil(&mut env, key, |c| {
                let lat: f64 = parse(value)?;
                c.base_latency = vec![lat; c.edges.len()];
                Ok(())
            })?,
            "env.topology" => with_netutil(&mut env, key, |c| {
                *c = match value.as_str() {
                    "diamond" => NetUtilConfig {
                        episode_length: c.episode_length,
                        ..NetUtilConfig::default()
                    },
                    "nsfnet" => nsfnet_config(c.episode_length),
                    other => {
                        return Err(HarnessError::Config(format!("unknown topology '{other}'")))
                    }
                };
                Ok(())
            })?,
            "env.dt" => with_pointmass(&mut env, key, |c| {
                c.dt = parse(value)?;
                Ok(())
            })?,
            "env.friction" => with_pointmass(&mut env, key, |c| {
                c.friction = parse(value)?;
                Ok(())
            })?,
            "env.dim" => with_pointmass(&mut env, key, |c| {
                c.dim = parse(value)?;
                Ok(())
            })?,
            "env.action_bound" => with_pointmass(&mut env, key, |c| {
                c.action_bound = parse(value)?;
                Ok(())
            })?,
            "env.goal_radius" => with_pointmass(&mut env, key, |c| {
                c.goal_radius = parse(value)?;
                Ok(())
            })?,
            "env.power_budget" => with_pointmass(&mut env, key, |c| match &mut c.variant {
                PointMassVariant::Power { budget } => {
                    *budget = parse(value)?;
                    Ok(())
                }
                PointMassVariant::Reacher => Err(HarnessError::Config(
                    "env.power_budget applies to pointmass_power only".into(),
                )),
            })?,
            // Algorithm keys.
            "algo.fw_lr" => algo.fw_lr = value.parse().map_err(|_| bad_value("a float"))?,
            "algo.actor_lr" => algo.actor_lr = value.parse().map_err(|_| bad_value("a float"))?,
            "algo.critic_lr" => algo.critic_lr = value.parse().map_err(|_| bad_value("a float"))?,
            "algo.tau" => algo.tau = value.parse().map_err(|_| bad_value("a float"))?,
            "algo.noise_sigma" => {
                algo.noise_sigma = value.parse().map_err(|_| bad_value("a float"))?
            }
            "algo.batch_size" => {
                algo.batch_size = value.parse().map_err(|_| bad_value("an integer"))?
            }
            "algo.gamma" => algo.gamma = value.parse().map_err(|_| bad_value("a float"))?,
            "algo.shaping_weight" => {
                algo.shaping_weight = value.parse().map_err(|_| bad_value("a float"))?
            }
            "algo.warmup_steps" => {
                algo.warmup_steps = value.parse().map_err(|_| bad_value("an integer"))?
            }
            "algo.actor_update_period" => {
                algo.actor_update_period = value.parse().map_err(|_| bad_value("an integer"))?
            }
            "algo.hidden" => {
                algo.hidden = value
                    .split(',')
                    .filter(|t| !t.trim().is_empty())
                    .map(|t| {
                        t.trim()
                            .parse()
                            .map_err(|_| bad_value("a comma list of integers"))
                    })
                    .collect::<Result<_, _>>()?
            }
            "algo.actor_output" => {
                algo.actor_output = match value.as_str() {
                    "identity" => OutputActivation::Identity,
                    "relu" => OutputActivation::Relu,
                    "tanh" => OutputActivation::Tanh,
                    _ => return Err(bad_value("identity|relu|tanh")),
                }
            }
            "algo.buffer_capacity" => {
                algo.buffer_capacity = value.parse().map_err(|_| bad_value("an integer"))?
            }
            "algo.epsilon" => algo.epsilon = value.parse().map_err(|_| bad_value("a float"))?,
            // Training keys.
            "train.total_steps" => {
                total_steps = value.parse().map_err(|_| bad_value("an integer"))?
            }
            "train.eval_every" => {
                eval_every = value.parse().map_err(|_| bad_value("an integer"))?
            }
            "train.eval_episodes" => {
                eval_episodes = value.parse().map_err(|_| bad_value("an integer"))?
            }
            "train.seeds" => seeds = parse_seeds(value)?,
            "train.out_dir" => out_dir = PathBuf::from(value),
            "train.record_wall_time" => {
                record_wall_time = value.parse().map_err(|_| bad_value("true|false"))?
            }
            "train.step_log" => step_log = value.parse().map_err(|_| bad_value("true|false"))?,
            "train.trajectory_log" => {
                trajectory_log = value.parse().map_err(|_| bad_value("true|false"))?
            }
            other => {
                return Err(HarnessError::Config(format!(
                    "unknown config key '{other}'"
                )));
            }
        }
    }

    let cfg = ExperimentConfig {
        env,
        algo,
        total_steps,
        eval_every,
        eval_episodes,
        seeds,
        out_dir,
        record_wall_time,
        step_log,
        trajectory_log,
    };
    cfg.validate()?;
    Ok(cfg)
}

fn parse<T: std::str::FromStr>(value: &str) -> Result<T, HarnessError> {
    value
        .parse()
        .map_err(|_| HarnessError::Config(format!("could not parse value '{value}'")))
}

fn with_bss(
    env: &mut EnvSpec,
    key: &str,
    f: impl FnOnce(&mut BssConfig) -> Result<(), HarnessError>,
) -> Result<(), HarnessError> {
    match env {
        EnvSpec::Bss(c) => f(c),
        _ => Err(HarnessError::Config(format!(
            "key '{key}' applies to the bss env only"
        ))),
    }
}

fn with_netutil(
    env: &mut EnvSpec,
    key: &str,
    f: impl FnOnce(&mut NetUtilConfig) -> Result<(), HarnessError>,
) -> Result<(), HarnessError> {
    match env {
        EnvSpec::NetUtil(c) => f(c),
        _ => Err(HarnessError::Config(format!(
            "key '{key}' applies to the netutil env only"
        ))),
    }
}

fn with_pointmass(
    env: &mut EnvSpec,
    key: &str,
    f: impl FnOnce(&mut PointMassConfig) -> Result<(), HarnessError>,
) -> Result<(), HarnessError> {
    match env {
        EnvSpec::PointMass(c) => f(c),
        _ => Err(HarnessError::Config(format!(
            "key '{key}' applies to the pointmass envs only"
        ))),
    }
}

/// Seed lists come as `0,1,2`, a single `7`, or an inclusive range `0..4`.
pub fn parse_seeds(value: &str) -> Result<Vec<u64>, HarnessError> {
    let bad = || HarnessError::Config(format!("could not parse seeds '{value}'"));
    if let Some((a, b)) = value.split_once("..") {
        let lo: u64 = a.trim().parse().map_err(|_| bad())?;
        let hi: u64 = b.trim().parse().map_err(|_| bad())?;
        if hi < lo {
            return Err(bad());
        }
        return Ok((lo..=hi).collect());
    }
    value
        .split(',')
        .filter(|t| !t.trim().is_empty())
        .map(|t| t.trim().parse().map_err(|_| bad()))
        .collect()
}

/// Paper-informed per-algorithm defaults, adjusted per environment (output
/// activation, exploration scale, warmup).
pub fn default_agent_config(algo: Algo, env: &EnvSpec) -> AgentConfig {
    let mut cfg = AgentConfig::for_algo(algo);
    match env {
        EnvSpec::PointMass(_) => {
            cfg.actor_output = OutputActivation::Tanh;
            cfg.noise_sigma = 0.05;
            cfg.warmup_steps = 1_000;
        }
        EnvSpec::Bss(_) => {
            cfg.actor_output = OutputActivation::Relu;
            cfg.noise_sigma = 5.0;
            cfg.warmup_steps = 10_000;
        }
        EnvSpec::NetUtil(_) => {
            cfg.actor_output = OutputActivation::Relu;
            cfg.noise_sigma = 3.0;
            cfg.warmup_steps = 10_000;
        }
    }
    if algo == Algo::FwpoTabular {
        cfg.gamma = 0.9;
        cfg.critic_lr = 0.002;
        cfg.tau = 0.01;
        cfg.batch_size = 64;
        cfg.hidden = vec![30];
        cfg.fw_lr = 0.05;
        cfg.epsilon = 0.1;
    }
    cfg
}

/// Classic 14-node NSFNET backbone with three flows, three candidate paths
/// each; every link is directed both ways with the same capacity.
pub fn nsfnet_config(episode_length: usize) -> NetUtilConfig {
    let links: [(usize, usize); 21] = [
        (0, 1),
        (0, 2),
        (0, 3),
        (1, 2),
        (1, 7),
        (2, 5),
        (3, 4),
        (3, 10),
        (4, 5),
        (4, 6),
        (5, 9),
        (5, 13),
        (6, 7),
        (7, 8),
        (8, 9),
        (8, 11),
        (8, 12),
        (10, 11),
        (10, 12),
        (11, 13),
        (12, 13),
    ];
    let mut edges = Vec::with_capacity(links.len() * 2);
    for (u, v) in links {
        edges.push((u, v));
        edges.push((v, u));
    }
    let edge_index = |u: usize, v: usize| -> usize {
        edges
            .iter()
            .position(|e| *e == (u, v))
            .expect("link exists")
    };
    let node_path = |nodes: &[usize]| -> Vec<usize> {
        nodes.windows(2).map(|w| edge_index(w[0], w[1])).collect()
    };
    let flows = vec![
        FlowSpec {
            src: 0,
            dst: 8,
            paths: vec![
                node_path(&[0, 1, 7, 8]),
                node_path(&[0, 2, 5, 9, 8]),
                node_path(&[0, 3, 10, 11, 8]),
            ],
        },
        FlowSpec {
            src: 4,
            dst: 12,
            paths: vec![
                node_path(&[4, 6, 7, 8, 12]),
                node_path(&[4, 5, 13, 12]),
                node_path(&[4, 3, 10, 12]),
            ],
        },
        FlowSpec {
            src: 1,
            dst: 13,
            paths: vec![
                node_path(&[1, 7, 8, 11, 13]),
                node_path(&[1, 2, 5, 13]),
                node_path(&[1, 0, 3, 10, 12, 13]),
            ],
        },
    ];
    NetUtilConfig {
        capacities: vec![50.0; edges.len()],
        base_latency: vec![1.0; edges.len()],
        edges,
        flows,
        rate_bound: 50.0,
        episode_length,
        phases: 8,
    }
}
