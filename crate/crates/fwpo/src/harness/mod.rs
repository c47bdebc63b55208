//! Experiment orchestration: seeding, the training loop with periodic
//! evaluation, metric persistence, seed sweeps with cross-seed aggregation,
//! and the command-line interface.
//!
//! Reproducibility contract: a `(config, seed)` pair fully determines every
//! byte of the metrics CSV. One master seed derives the named RNG streams
//! (env, exploration, init, replay), so adding a consumer to one stream
//! cannot perturb the others. Wall-clock timing is recorded only when
//! `train.record_wall_time = true`, since real timing would break the
//! byte-identity contract; the column is zero otherwise.

mod cli;
mod config;

pub use cli::cli;
pub use config::{
    default_agent_config, nsfnet_config, parse_config, parse_seeds, EnvSpec, ExperimentConfig,
};

use crate::agents::{Agent, AgentError, Algo};
use crate::envs::Environment;
use crate::geometry::DEFAULT_TOL;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

#[derive(Debug, Clone, thiserror::Error)]
pub enum HarnessError {
    /// Configuration problems: exit code 1.
    #[error("config error: {0}")]
    Config(String),
    /// Failures while running: exit code 2.
    #[error("runtime error: {0}")]
    Runtime(String),
}

impl From<AgentError> for HarnessError {
    fn from(e: AgentError) -> Self {
        HarnessError::Runtime(e.to_string())
    }
}

impl From<std::io::Error> for HarnessError {
    fn from(e: std::io::Error) -> Self {
        HarnessError::Runtime(e.to_string())
    }
}

/// Named RNG streams derived from one run seed by a fixed splitmix chain.
pub struct RngStreams {
    pub env: ChaCha8Rng,
    pub exploration: ChaCha8Rng,
    pub init: ChaCha8Rng,
    pub replay: ChaCha8Rng,
    pub eval: ChaCha8Rng,
}

impl RngStreams {
    pub fn new(seed: u64) -> Self {
        Self {
            env: ChaCha8Rng::seed_from_u64(derive_stream(seed, 1)),
            exploration: ChaCha8Rng::seed_from_u64(derive_stream(seed, 2)),
            init: ChaCha8Rng::seed_from_u64(derive_stream(seed, 3)),
            replay: ChaCha8Rng::seed_from_u64(derive_stream(seed, 4)),
            eval: ChaCha8Rng::seed_from_u64(derive_stream(seed, 5)),
        }
    }
}

fn derive_stream(seed: u64, tag: u64) -> u64 {
    // splitmix64 over the (seed, tag) pair.
    let mut z = seed ^ tag.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    pub step: usize,
    pub eval_mean_return: f64,
    pub eval_std_return: f64,
    pub cum_pre_violations: u64,
    pub wall_ms: u64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunMetrics {
    pub rows: Vec<MetricsRow>,
}

impl RunMetrics {
    pub const CSV_HEADER: &'static str =
        "step,eval_mean_return,eval_std_return,cum_pre_violations,wall_ms";

    pub fn to_csv(&self) -> String {
        let mut out = String::from(Self::CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                r.step, r.eval_mean_return, r.eval_std_return, r.cum_pre_violations, r.wall_ms
            ));
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self, HarnessError> {
        let mut lines = text.lines();
        let header = lines
            .next()
            .ok_or_else(|| HarnessError::Runtime("empty metrics CSV".into()))?;
        if header != Self::CSV_HEADER {
            return Err(HarnessError::Runtime(format!(
                "unexpected metrics header '{header}'"
            )));
        }
        let mut rows = Vec::new();
        for line in lines {
            if line.trim().is_empty() {
                continue;
            }
            let cells: Vec<&str> = line.split(',').collect();
            if cells.len() != 5 {
                return Err(HarnessError::Runtime(format!("bad metrics row '{line}'")));
            }
            rows.push(MetricsRow {
                step: cells[0]
                    .parse()
                    .map_err(|_| HarnessError::Runtime("bad step".into()))?,
                eval_mean_return: cells[1]
                    .parse()
                    .map_err(|_| HarnessError::Runtime("bad mean".into()))?,
                eval_std_return: cells[2]
                    .parse()
                    .map_err(|_| HarnessError::Runtime("bad std".into()))?,
                cum_pre_violations: cells[3]
                    .parse()
                    .map_err(|_| HarnessError::Runtime("bad violations".into()))?,
                wall_ms: cells[4]
                    .parse()
                    .map_err(|_| HarnessError::Runtime("bad wall_ms".into()))?,
            });
        }
        Ok(Self { rows })
    }
}

/// Deterministic raw-action source for evaluation.
pub trait EvalPolicy {
    fn raw_action(&self, env: &dyn Environment, state: &[f64]) -> Result<Vec<f64>, HarnessError>;
}

impl EvalPolicy for Agent {
    fn raw_action(&self, env: &dyn Environment, state: &[f64]) -> Result<Vec<f64>, HarnessError> {
        Ok(Agent::raw_action(self, env, state)?)
    }
}

/// Wraps a plain function as an evaluation policy.
pub struct FnPolicy<F: Fn(&[f64]) -> Vec<f64>>(pub F);

impl<F: Fn(&[f64]) -> Vec<f64>> EvalPolicy for FnPolicy<F> {
    fn raw_action(&self, _env: &dyn Environment, state: &[f64]) -> Result<Vec<f64>, HarnessError> {
        Ok((self.0)(state))
    }
}

/// Runs `episodes` noise-free episodes on fresh resets seeded
/// `seed + episode_index`, projecting every action; returns the sample mean
/// and population standard deviation of episode returns.
pub fn evaluate(
    policy: &dyn EvalPolicy,
    env: &mut dyn Environment,
    episodes: usize,
    seed: u64,
) -> Result<(f64, f64), HarnessError> {
    assert!(episodes >= 1);
    let mut returns = Vec::with_capacity(episodes);
    for ep in 0..episodes {
        let mut state = env.reset(seed + ep as u64);
        let mut total = 0.0;
        loop {
            let raw = policy.raw_action(env, &state)?;
            let cset = env.constraint_of(&state);
            let executed = if cset
                .contains(&raw, DEFAULT_TOL)
                .map_err(|e| HarnessError::Runtime(e.to_string()))?
            {
                raw
            } else {
                cset.project(&raw)
                    .map_err(|e| HarnessError::Runtime(e.to_string()))?
            };
            let out = env
                .step(&executed)
                .map_err(|e| HarnessError::Runtime(e.to_string()))?;
            total += out.reward;
            state = out.next_state;
            if out.done {
                break;
            }
        }
        returns.push(total);
    }
    Ok(mean_and_population_std(&returns))
}

pub fn mean_and_population_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

pub struct RunRecord {
    pub metrics: RunMetrics,
    pub run_dir: PathBuf,
    pub checkpoints: Vec<PathBuf>,
}

/// Trains one seed to completion: `total_steps` environment interactions,
/// an evaluation row every `eval_every` steps, metrics CSV plus manifest and
/// policy checkpoint under `out_dir/seed_<k>/`.
pub fn run_training(cfg: &ExperimentConfig, seed: u64) -> Result<RunRecord, HarnessError> {
    cfg.validate()?;
    let run_dir = cfg.out_dir.join(format!("seed_{seed}"));
    std::fs::create_dir_all(&run_dir)?;

    let mut streams = RngStreams::new(seed);
    let mut env = cfg.env.build()?;
    let mut eval_env = cfg.env.build()?;
    let mut agent = Agent::new(cfg.algo.clone(), env.as_ref(), &mut streams.init)?;
    let eval_seed = streams.eval.random::<u64>();

    let started = Instant::now();
    let mut metrics = RunMetrics::default();
    let mut cum_pre_violations: u64 = 0;
    let mut state = env.reset(streams.env.random::<u64>());
    let mut step_log: Option<std::io::BufWriter<std::fs::File>> = if cfg.step_log {
        let f = std::fs::File::create(run_dir.join("steps.csv"))?;
        let mut w = std::io::BufWriter::new(f);
        writeln!(w, "step,pre_violation,executed_feasible")?;
        Some(w)
    } else {
        None
    };
    let mut trajectory_log: Option<std::io::BufWriter<std::fs::File>> = if cfg.trajectory_log {
        let f = std::fs::File::create(run_dir.join("trajectory.csv"))?;
        let mut w = std::io::BufWriter::new(f);
        let mut header = String::from("step");
        for i in 0..env.state_dim() {
            header.push_str(&format!(",s{i}"));
        }
        for i in 0..env.action_dim() {
            header.push_str(&format!(",a{i}"));
        }
        header.push_str(",reward");
        writeln!(w, "{header}")?;
        Some(w)
    } else {
        None
    };

    for step in 0..cfg.total_steps {
        let cset = if step_log.is_some() {
            Some(env.constraint_of(&state))
        } else {
            None
        };
        let t = agent.train_step(
            env.as_mut(),
            &state,
            step,
            &mut streams.exploration,
            &mut streams.replay,
        )?;
        if t.pre_violation {
            cum_pre_violations += 1;
        }
        if let (Some(w), Some(cset)) = (step_log.as_mut(), cset) {
            let feasible = cset
                .contains(&t.action, DEFAULT_TOL)
                .map_err(|e| HarnessError::Runtime(e.to_string()))?;
            writeln!(
                w,
                "{},{},{}",
                step,
                u8::from(t.pre_violation),
                u8::from(feasible)
            )?;
        }
        if let Some(w) = trajectory_log.as_mut() {
            let mut row = step.to_string();
            for v in &t.state {
                row.push_str(&format!(",{v}"));
            }
            for v in &t.action {
                row.push_str(&format!(",{v}"));
            }
            row.push_str(&format!(",{}", t.reward));
            writeln!(w, "{row}")?;
        }
        state = if t.done {
            env.reset(streams.env.random::<u64>())
        } else {
            t.next_state
        };

        if (step + 1) % cfg.eval_every == 0 {
            let (mean, std) = evaluate(&agent, eval_env.as_mut(), cfg.eval_episodes, eval_seed)?;
            let wall_ms = if cfg.record_wall_time {
                started.elapsed().as_millis() as u64
            } else {
                0
            };
            metrics.rows.push(MetricsRow {
                step: step + 1,
                eval_mean_return: mean,
                eval_std_return: std,
                cum_pre_violations,
                wall_ms,
            });
        }
    }
    if let Some(mut w) = step_log.take() {
        w.flush()?;
    }
    if let Some(mut w) = trajectory_log.take() {
        w.flush()?;
    }

    std::fs::write(run_dir.join("metrics.csv"), metrics.to_csv())?;
    let mut manifest = cfg.manifest_entries();
    manifest.insert("run.seed".into(), seed.to_string());
    manifest.insert("run.version".into(), env!("CARGO_PKG_VERSION").to_string());
    manifest.insert(
        "run.optimizer".into(),
        "adam(beta1=0.9,beta2=0.999,eps=1e-8)".into(),
    );
    manifest.insert("run.eval_std".into(), "population".into());
    let mut text = String::new();
    for (k, v) in &manifest {
        text.push_str(&format!("{k} = {v}\n"));
    }
    std::fs::write(run_dir.join("manifest.txt"), text)?;

    agent.save_policy(&run_dir)?;
    let mut checkpoints = vec![run_dir.join("critic.net")];
    if agent.actor().is_some() {
        checkpoints.push(run_dir.join("actor.net"));
    } else {
        checkpoints.push(run_dir.join("policy_table.txt"));
    }
    Ok(RunRecord {
        metrics,
        run_dir,
        checkpoints,
    })
}

pub struct SweepRecord {
    pub per_seed: Vec<(u64, RunMetrics)>,
    pub aggregate_path: PathBuf,
    pub summary_path: PathBuf,
}

/// Runs every seed (in parallel workers), then writes `aggregate.csv` with
/// per-step cross-seed mean/std of the evaluation return and the mean
/// cumulative violation count, plus `summary.txt` with the final-10
/// evaluation statistics.
pub fn sweep(cfg: &ExperimentConfig) -> Result<SweepRecord, HarnessError> {
    cfg.validate()?;
    std::fs::create_dir_all(&cfg.out_dir)?;
    let results: Vec<(u64, Result<RunRecord, HarnessError>)> = std::thread::scope(|scope| {
        let handles: Vec<_> = cfg
            .seeds
            .iter()
            .map(|&seed| (seed, scope.spawn(move || run_training(cfg, seed))))
            .collect();
        handles
            .into_iter()
            .map(|(seed, h)| (seed, h.join().expect("worker panicked")))
            .collect()
    });
    let mut per_seed = Vec::with_capacity(results.len());
    for (seed, r) in results {
        per_seed.push((seed, r?.metrics));
    }

    let row_count = per_seed[0].1.rows.len();
    if per_seed.iter().any(|(_, m)| m.rows.len() != row_count) {
        return Err(HarnessError::Runtime(
            "seed runs produced differing row counts".into(),
        ));
    }
    let mut aggregate = String::from("step,mean_return,std_return,mean_cum_pre_violations\n");
    for i in 0..row_count {
        let step = per_seed[0].1.rows[i].step;
        let returns: Vec<f64> = per_seed
            .iter()
            .map(|(_, m)| m.rows[i].eval_mean_return)
            .collect();
        let (mean, std) = mean_and_population_std(&returns);
        let viol_mean = per_seed
            .iter()
            .map(|(_, m)| m.rows[i].cum_pre_violations as f64)
            .sum::<f64>()
            / per_seed.len() as f64;
        aggregate.push_str(&format!("{step},{mean},{std},{viol_mean}\n"));
    }
    let aggregate_path = cfg.out_dir.join("aggregate.csv");
    std::fs::write(&aggregate_path, aggregate)?;

    // Final-10-evaluations statistic per seed, then across seeds.
    let per_seed_final10: Vec<f64> = per_seed
        .iter()
        .map(|(_, m)| {
            let tail: Vec<f64> = m
                .rows
                .iter()
                .rev()
                .take(10)
                .map(|r| r.eval_mean_return)
                .collect();
            tail.iter().sum::<f64>() / tail.len() as f64
        })
        .collect();
    let (f10_mean, f10_std) = mean_and_population_std(&per_seed_final10);
    let viol_totals: Vec<f64> = per_seed
        .iter()
        .map(|(_, m)| m.rows.last().map_or(0.0, |r| r.cum_pre_violations as f64))
        .collect();
    let (viol_mean, _) = mean_and_population_std(&viol_totals);
    let summary_path = cfg.out_dir.join("summary.txt");
    let mut summary = String::new();
    summary.push_str(&format!(
        "seeds = {}\n",
        cfg.seeds
            .iter()
            .map(|s| s.to_string())
            .collect::<Vec<_>>()
            .join(",")
    ));
    summary.push_str(&format!("final10_mean_return = {f10_mean}\n"));
    summary.push_str(&format!("final10_std_return = {f10_std}\n"));
    summary.push_str(&format!("mean_cum_pre_violations = {viol_mean}\n"));
    std::fs::write(&summary_path, summary)?;

    Ok(SweepRecord {
        per_seed,
        aggregate_path,
        summary_path,
    })
}

/// Resolves the output directory: `FWPO_OUT_DIR` overrides the `--out` flag,
/// which overrides the config file.
pub fn resolve_out_dir(cfg: &mut ExperimentConfig, flag: Option<PathBuf>) {
    if let Some(dir) = flag {
        cfg.out_dir = dir;
    }
    if let Ok(dir) = std::env::var("FWPO_OUT_DIR") {
        if !dir.is_empty() {
            cfg.out_dir = PathBuf::from(dir);
        }
    }
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig, HarnessError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| HarnessError::Config(format!("cannot read config {}: {e}", path.display())))?;
    parse_config(&text)
}

/// Convenience used by tests and the acceptance suite: run one algorithm on
/// one in-memory config without touching the CLI.
pub fn train_once(cfg: &ExperimentConfig, seed: u64) -> Result<RunRecord, HarnessError> {
    run_training(cfg, seed)
}

/// Base config for an (env, algo) pair with library defaults.
pub fn experiment(env: EnvSpec, algo: Algo, out_dir: PathBuf) -> ExperimentConfig {
    let agent = default_agent_config(algo, &env);
    ExperimentConfig {
        env,
        algo: agent,
        total_steps: 20_000,
        eval_every: 1_000,
        eval_episodes: 10,
        seeds: vec![0, 1, 2, 3, 4],
        out_dir,
        record_wall_time: false,
        step_log: false,
        trajectory_log: false,
    }
}

#[cfg(test)]
mod tests;
