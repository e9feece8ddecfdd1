//! Command-line driver for the palaeoclimate volatility pipeline.
//!
//! Subcommands mirror the analysis stages: `fit-mix` approximates MDP
//! samples as Gaussian mixtures, `run` executes the marginalized MCMC,
//! `interp` draws latent paths and interpolates onto a regular grid,
//! `icecore` fits the observed-series model, `validate` runs the simulated
//! coverage study, and `all` chains fit-mix, run, and interp.

mod commands;
mod config;

use anyhow::Result;
use clap::{Parser, Subcommand};
use config::RunConfig;
use std::path::PathBuf;

#[derive(Parser)]
#[command(name = "nigclim", version, about = "Latent climate and volatility inference under an NIG process prior", after_long_help = config::config_help())]
struct Cli {
    /// Key=value config file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Master seed (overrides the config file).
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads (overrides the config file; 0 = all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Per-key config overrides, e.g. --set iters=5000.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    set: Vec<String>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit per-layer Gaussian mixtures to MDP samples.
    FitMix,
    /// Run the marginalized volatility MCMC.
    Run,
    /// Draw climate paths and interpolate onto the grid.
    Interp,
    /// Fit the observed-series model.
    Icecore,
    /// Simulated coverage validation.
    Validate,
    /// fit-mix, run, and interp in sequence.
    All,
}

fn effective_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::from_file(path)?,
        None => RunConfig::defaults(),
    };
    for kv in &cli.set {
        let Some((key, value)) = kv.split_once('=') else {
            anyhow::bail!("--set expects KEY=VALUE, got {kv:?}");
        };
        cfg.set(key.trim(), value.trim())?;
    }
    if let Some(seed) = cli.seed {
        cfg.set("seed", &seed.to_string())?;
    }
    if let Some(threads) = cli.threads {
        cfg.set("threads", &threads.to_string())?;
    }
    Ok(cfg)
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let code = match run(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e:#}");
            1
        }
    };
    std::process::exit(code);
}

fn run(cli: &Cli) -> Result<()> {
    let cfg = effective_config(cli)?;
    let threads = cfg.threads()?;
    if threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .ok();
    }
    match cli.command {
        Command::FitMix => commands::cmd_fit_mix(&cfg),
        Command::Run => commands::cmd_run(&cfg),
        Command::Interp => commands::cmd_interp(&cfg),
        Command::Icecore => commands::cmd_icecore(&cfg),
        Command::Validate => commands::cmd_validate(&cfg),
        Command::All => commands::cmd_all(&cfg),
    }
}
