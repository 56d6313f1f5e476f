//! `graphxc`: build label graphs, cluster, train, predict, evaluate and ablate.
//!
//! Settings come from a flat JSON config, then from `XCG_<KEY>` environment
//! variables (values parsed as JSON, falling back to a string), then from
//! command-line flags. Exit codes: 0 success, 2 configuration error, 3 data
//! or file error, 4 numeric failure.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use graphxc_core::synth::SynthConfig;
use graphxc_core::{Error, Result};
use serde_json::Value;

use config::RunConfig;

const ENV_PREFIX: &str = "XCG_";
/// Environment variables with the prefix that are flags, not config keys.
const RESERVED_ENV: [&str; 3] = ["XCG_CONFIG", "XCG_SEED", "XCG_THREADS"];

#[derive(Parser, Debug)]
#[command(name = "graphxc", version, about = "Extreme multi-label classification with label correlation graphs")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Global {
    /// Flat JSON run configuration.
    #[arg(long, global = true, env = "XCG_CONFIG")]
    config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true, env = "XCG_SEED")]
    seed: Option<u64>,
    /// Worker threads; defaults to all cores.
    #[arg(long, global = true, env = "XCG_THREADS")]
    threads: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Infers the label graph from the training ground truth.
    BuildGraph,
    /// Writes the Module I label clustering.
    Cluster,
    /// Trains Modules I to IV, writing a checkpoint and log per module.
    Train {
        /// Continue from the checkpoint written after this module (1, 2 or 3).
        #[arg(long)]
        resume_from: Option<usize>,
    },
    /// Scores the test documents with the trained model.
    Predict,
    /// Reports P@k, R@k, PSP@k, per-bin contributions and optionally LMI.
    Eval {
        /// Sparse score file; defaults to the workdir predictions.
        #[arg(long)]
        predictions: Option<PathBuf>,
    },
    /// Runs the pipeline for every configured ablation variant.
    Ablate,
    /// Writes a synthetic long-tail dataset.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 2000)]
        n_train: usize,
        #[arg(long, default_value_t = 500)]
        n_test: usize,
        #[arg(long, default_value_t = 512)]
        n_labels: usize,
        #[arg(long, default_value_t = 1024)]
        vocab: usize,
        #[arg(long, default_value_t = 32)]
        n_groups: usize,
    },
}

fn apply_env(cfg: RunConfig, vars: impl Iterator<Item = (String, String)>) -> Result<RunConfig> {
    let mut value = serde_json::to_value(&cfg).map_err(|e| Error::Config(e.to_string()))?;
    let map = value.as_object_mut().expect("config serialises to an object");
    let mut overridden = false;
    for (name, raw) in vars {
        if !name.starts_with(ENV_PREFIX) || RESERVED_ENV.contains(&name.as_str()) || name == "XCG_LOG" {
            continue;
        }
        let key = name[ENV_PREFIX.len()..].to_ascii_lowercase();
        if !map.contains_key(&key) {
            return Err(Error::Config(format!("environment variable {name} does not name a config key")));
        }
        let parsed = serde_json::from_str(&raw).unwrap_or(Value::String(raw));
        map.insert(key, parsed);
        overridden = true;
    }
    if !overridden {
        return Ok(cfg);
    }
    serde_json::from_value(value).map_err(|e| Error::Config(format!("environment override: {e}")))
}

fn resolve(global: &Global) -> Result<RunConfig> {
    let base = match &global.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    let mut cfg = apply_env(base, std::env::vars())?;
    if let Some(seed) = global.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn run(cli: Cli) -> Result<String> {
    if let Some(n) = cli.global.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    }
    if let Command::Synth { out, n_train, n_test, n_labels, vocab, n_groups } = &cli.command {
        let seed = cli.global.seed.unwrap_or(0);
        let cfg = SynthConfig {
            n_train: *n_train,
            n_test: *n_test,
            n_labels: *n_labels,
            vocab: *vocab,
            n_groups: *n_groups,
            seed,
            ..SynthConfig::default()
        };
        return commands::synth(out, &cfg);
    }
    let cfg = resolve(&cli.global)?;
    cfg.validate()?;
    match cli.command {
        Command::BuildGraph => commands::build_graph(&cfg),
        Command::Cluster => commands::cluster(&cfg),
        Command::Train { resume_from } => commands::train(&cfg, resume_from),
        Command::Predict => commands::predict(&cfg),
        Command::Eval { predictions } => commands::eval(&cfg, predictions.as_deref()),
        Command::Ablate => commands::ablate(&cfg),
        Command::Synth { .. } => unreachable!("handled above"),
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) => 2,
        Error::Numeric(_) => 4,
        _ => 3,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().filter_or("XCG_LOG", "info")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(out) => {
            print!("{out}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
