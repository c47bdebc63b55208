//! Command-line interface: `fwpo train|eval|sweep`.
//!
//! Exit codes: 0 on success, 1 on configuration/usage errors, 2 on runtime
//! failures. Errors go to standard error.

use super::{
    evaluate, load_config, parse_seeds, resolve_out_dir, sweep, train_once, EnvSpec, FnPolicy,
    HarnessError,
};
use crate::neural::DenseNet;
use clap::error::ErrorKind;
use clap::{Parser, Subcommand};
use std::ffi::OsString;
use std::path::PathBuf;

#[derive(Parser, Debug)]
#[command(
    name = "fwpo",
    about = "Frank-Wolfe policy optimization for action-constrained RL",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train one seed from a config file.
    Train {
        /// Experiment config file.
        #[arg(long)]
        config: PathBuf,
        /// Run seed.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output directory (overrides the config; FWPO_OUT_DIR overrides both).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate a saved actor checkpoint on a named environment.
    Eval {
        /// Actor checkpoint written by a training run.
        #[arg(long)]
        checkpoint: PathBuf,
        /// Environment name: bss | netutil | pointmass_reacher | pointmass_power.
        #[arg(long)]
        env: String,
        /// Number of evaluation episodes.
        #[arg(long, default_value_t = 10)]
        episodes: usize,
        /// Base seed for the evaluation episodes.
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Train every seed of a config and write cross-seed aggregates.
    Sweep {
        /// Experiment config file.
        #[arg(long)]
        config: PathBuf,
        /// Seed list (`0,1,2`) or inclusive range (`0..4`); defaults to the config.
        #[arg(long)]
        seeds: Option<String>,
        /// Output directory (overrides the config; FWPO_OUT_DIR overrides both).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Runs the CLI against an argument vector and returns the process exit code.
pub fn cli<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let parsed = match Cli::try_parse_from(argv) {
        Ok(p) => p,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return code;
        }
    };
    match run(parsed) {
        Ok(()) => 0,
        Err(HarnessError::Config(msg)) => {
            eprintln!("fwpo: config error: {msg}");
            1
        }
        Err(HarnessError::Runtime(msg)) => {
            eprintln!("fwpo: runtime error: {msg}");
            2
        }
    }
}

fn run(cli: Cli) -> Result<(), HarnessError> {
    match cli.command {
        Command::Train { config, seed, out } => {
            let mut cfg = load_config(&config)?;
            resolve_out_dir(&mut cfg, out);
            let record = train_once(&cfg, seed)?;
            println!("wrote {}", record.run_dir.join("metrics.csv").display());
            Ok(())
        }
        Command::Eval {
            checkpoint,
            env,
            episodes,
            seed,
        } => {
            if episodes == 0 {
                return Err(HarnessError::Config("need at least one episode".into()));
            }
            let spec = EnvSpec::by_name(&env)?;
            let mut env = spec.build()?;
            let net = DenseNet::<f64>::load_file(&checkpoint)
                .map_err(|e| HarnessError::Config(format!("cannot load checkpoint: {e}")))?;
            if net.input_dim() != env.state_dim() || net.output_dim() != env.action_dim() {
                return Err(HarnessError::Config(format!(
                    "checkpoint shape {}→{} does not match env {}→{}",
                    net.input_dim(),
                    net.output_dim(),
                    env.state_dim(),
                    env.action_dim()
                )));
            }
            let policy = FnPolicy(move |s: &[f64]| net.forward(s));
            let (mean, std) = evaluate(&policy, env.as_mut(), episodes, seed)?;
            println!("episodes = {episodes}");
            println!("mean_return = {mean}");
            println!("std_return = {std}");
            Ok(())
        }
        Command::Sweep { config, seeds, out } => {
            let mut cfg = load_config(&config)?;
            if let Some(spec) = seeds {
                cfg.seeds = parse_seeds(&spec)?;
            }
            resolve_out_dir(&mut cfg, out);
            let record = sweep(&cfg)?;
            println!("wrote {}", record.aggregate_path.display());
            println!("wrote {}", record.summary_path.display());
            Ok(())
        }
    }
}
