//! `gaitlab`: experiment runner. Exit codes: 0 ok, 1 other failure, 2 config or input
//! error, 3 simulator divergence.

mod commands;
mod config;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use gaitlab::Error;

use commands::{Context, Outcome};
use config::ExperimentConfig;

#[derive(Parser, Debug)]
#[command(name = "gaitlab", version, about = "CPG quadruped locomotion experiments")]
struct Cli {
    /// Experiment config (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Base seed; episode and training seeds derive from it.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Output directory (replay prints to stdout without it).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads; results do not depend on it.
    #[arg(long, global = true)]
    parallel: Option<usize>,
    /// Training sample budget, overriding `train.updates`.
    #[arg(long, global = true)]
    budget: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Evaluate the configured controller and write logs and reports.
    Run,
    /// Train a policy; writes checkpoints and a learning curve.
    Train {
        /// Continue from this checkpoint.
        #[arg(long)]
        resume: Option<PathBuf>,
    },
    /// Train and evaluate one policy per reward-weight cell (27 rows).
    SweepRewards,
    /// Train and evaluate one policy per observation case (13 rows).
    SweepObservations,
    /// Replay a frozen policy with scaled stride length and fit CoT against speed.
    ExtendedGait {
        #[arg(long)]
        checkpoint: PathBuf,
        /// Comma-separated stride-length scale factors.
        #[arg(long, value_delimiter = ',', default_values_t = commands::DEFAULT_SCALES)]
        scales: Vec<f64>,
    },
    /// Recompute the metrics report of a logged episode.
    Replay {
        #[arg(long)]
        log: PathBuf,
        /// Stored report to compare with; defaults to `<stem>.report.json` beside the log.
        #[arg(long)]
        against: Option<PathBuf>,
    },
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::Parse { .. } | Error::Csv(_) | Error::Json(_) => 2,
        Error::Diverged { .. } => 3,
        _ => 1,
    }
}

fn run(cli: Cli) -> gaitlab::Result<Outcome> {
    let (cfg, cfg_text) = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
            (Some(ExperimentConfig::parse(&text)?), Some(text))
        }
        None => (None, None),
    };
    if cli.parallel == Some(0) {
        return Err(Error::Config("--parallel must be at least 1".into()));
    }
    let out = match (&cli.out, &cli.command) {
        (Some(o), _) => o.clone(),
        (None, Command::Replay { .. }) => PathBuf::new(),
        (None, _) => return Err(Error::Config("--out is required".into())),
    };
    let ctx = Context {
        cfg,
        cfg_text,
        seed: cli.seed,
        out,
        parallel: cli.parallel,
        budget: cli.budget,
    };
    match &cli.command {
        Command::Run => commands::cmd_run(&ctx),
        Command::Train { resume } => commands::cmd_train(&ctx, resume.as_deref()),
        Command::SweepRewards => commands::cmd_sweep_rewards(&ctx),
        Command::SweepObservations => commands::cmd_sweep_observations(&ctx),
        Command::ExtendedGait { checkpoint, scales } => commands::cmd_extended_gait(&ctx, checkpoint, scales),
        Command::Replay { log, against } => commands::cmd_replay(&ctx, log, against.as_deref()),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(Outcome::Ok) => ExitCode::SUCCESS,
        Ok(Outcome::Diverged(n)) => {
            eprintln!("error: {n} episode(s) diverged; outputs were written");
            ExitCode::from(3)
        }
        Ok(Outcome::Mismatch) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
