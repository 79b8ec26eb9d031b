mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use crate::config::{Overrides, RunConfig};

/// Agentic geolocalization harness: rollouts, evaluation, rewards and curation.
#[derive(Debug, Parser)]
#[command(name = "geovista", version)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// Run configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Manifest to use instead of `paths.manifest`.
    #[arg(long, global = true)]
    manifest: Option<PathBuf>,
    /// Output directory instead of `paths.out`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Disable retries so that repeated runs produce identical outputs.
    #[arg(long, global = true)]
    deterministic: bool,
    /// Only use the first N manifest entries.
    #[arg(long, global = true)]
    limit: Option<usize>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the agent loop over the manifest and log trajectories.
    Rollout,
    /// Score a trajectory log against the manifest labels.
    Eval {
        /// Trajectory log; defaults to `<out>/trajectories.jsonl`.
        #[arg(long)]
        trajectories: Option<PathBuf>,
    },
    /// Hierarchical rewards and group-normalized advantages for a log.
    Reward {
        #[arg(long)]
        trajectories: Option<PathBuf>,
        /// Split the log into consecutive groups of this size instead of
        /// grouping by sample id.
        #[arg(long)]
        group_size: Option<usize>,
    },
    /// Filter the manifest and synthesize fine-tuning trajectories.
    Curate,
}

fn run(cli: Cli) -> Result<ExitCode> {
    let c = cli.common;
    let config_path = c.config.context("--config is required")?;
    let overrides = Overrides {
        manifest: c.manifest,
        out: c.out,
        workers: c.workers,
        seed: c.seed,
        deterministic: c.deterministic,
    };
    let config = RunConfig::load(&config_path, &overrides)?;
    match cli.command {
        Command::Rollout => {
            let errors = commands::rollout::run(&config, c.limit)?;
            if errors > 0 {
                eprintln!("error: {errors} trajectories ended in a protocol error");
                return Ok(ExitCode::FAILURE);
            }
        }
        Command::Eval { trajectories } => commands::eval::run(&config, c.limit, trajectories.as_deref())?,
        Command::Reward { trajectories, group_size } => {
            commands::reward::run(&config, c.limit, trajectories.as_deref(), group_size)?
        }
        Command::Curate => commands::curate::run(&config, c.limit)?,
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
