// `!(x > 0.0)` is used on purpose so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use serde_json::json;

use crate::commands::Output;
use crate::config::{Format, RunConfig};

/// Cat-qubit repeater toolkit: gate simulation, pulse optimization, device
/// estimates, transduction and repeater rates.
#[derive(Debug, Parser)]
#[command(name = "catrep", version)]
struct Cli {
    /// TOML run configuration; defaults apply to missing keys.
    #[arg(long, global = true, env = "CATREP_CONFIG")]
    config: Option<PathBuf>,
    /// Output root; each command writes into `<out>/<command>/`.
    #[arg(long, global = true, default_value = "catrep-out")]
    out: PathBuf,
    /// Overrides `grape.seed` and `chain.seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides `chain.trials`.
    #[arg(long, global = true)]
    trials: Option<usize>,
    /// Overrides `output.format`.
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Gate durations and fidelities for each `K/κ` row.
    Gates,
    /// Optimized drive and undrive pulses.
    Grape {
        /// Overrides `grape.iters`; 0 reports the initial guess.
        #[arg(long)]
        iters: Option<usize>,
    },
    /// Inherited Kerr, inverse-Purcell loss and `κ_eff` per device.
    Device,
    /// Spin-ensemble transfer efficiency and transduction budget.
    Transduce,
    /// Rates and fidelities for every chain scenario.
    Rates {
        /// Also write the rate-versus-distance curves.
        #[arg(long)]
        figure6: bool,
    },
    /// Distances where each chain overtakes direct transmission.
    Crossover,
    /// Monte Carlo check of the mean distribution time.
    Mc,
    /// Rate-versus-distance curves for all schemes.
    Figure6,
    /// Print the fully resolved configuration.
    Config,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Self::Gates => "gates",
            Self::Grape { .. } => "grape",
            Self::Device => "device",
            Self::Transduce => "transduce",
            Self::Rates { .. } => "rates",
            Self::Crossover => "crossover",
            Self::Mc => "mc",
            Self::Figure6 => "figure6",
            Self::Config => "config",
        }
    }
}

fn resolve(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.grape.seed = seed;
        cfg.chain.seed = seed;
    }
    if let Some(trials) = cli.trials {
        cfg.chain.trials = trials;
    }
    if let Some(format) = cli.format {
        cfg.output.format = format;
    }
    if let Command::Grape { iters: Some(iters) } = cli.command {
        cfg.grape.iters = iters;
    }
    cfg.validate().context("invalid configuration")?;
    Ok(cfg)
}

/// Writes every file into a fresh staging directory, then moves it into place.
fn write_outputs(dir: &Path, command: &str, cfg: &RunConfig, out: &Output) -> Result<()> {
    let parent = dir.parent().unwrap_or(Path::new("."));
    fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    let staging = parent.join(format!(".{command}.partial"));
    if staging.exists() {
        fs::remove_dir_all(&staging)?;
    }
    fs::create_dir(&staging)?;
    let format = cfg.output.format;
    let mut files = Vec::new();
    for t in &out.tables {
        let name = t.file_name(format);
        fs::write(staging.join(&name), t.bytes(format)?)?;
        files.push(name);
    }
    fs::write(staging.join("resolved_config.toml"), cfg.to_toml()?)?;
    let run = json!({
        "tool": "catrep",
        "version": env!("CARGO_PKG_VERSION"),
        "command": command,
        "files": files,
        "config": cfg,
        "summary": out.summary,
    });
    let mut bytes = serde_json::to_vec_pretty(&run)?;
    bytes.push(b'\n');
    fs::write(staging.join("run.json"), bytes)?;
    if dir.exists() {
        fs::remove_dir_all(dir).with_context(|| format!("replacing {}", dir.display()))?;
    }
    fs::rename(&staging, dir).with_context(|| format!("moving results to {}", dir.display()))?;
    Ok(())
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    let cfg = resolve(&cli)?;
    let out = match &cli.command {
        Command::Config => {
            print!("{}", cfg.to_toml()?);
            return Ok(());
        }
        Command::Gates => commands::gates(&cfg)?,
        Command::Grape { .. } => commands::grape(&cfg)?,
        Command::Device => commands::device(&cfg)?,
        Command::Transduce => commands::transduce(&cfg)?,
        Command::Rates { figure6 } => commands::rates(&cfg, *figure6)?,
        Command::Crossover => commands::crossover(&cfg)?,
        Command::Mc => commands::mc(&cfg)?,
        Command::Figure6 => commands::figure6(&cfg)?,
    };
    let name = cli.command.name();
    let dir = cli.out.join(name);
    write_outputs(&dir, name, &cfg, &out)?;
    println!("{}", serde_json::to_string_pretty(&out.summary)?);
    eprintln!("wrote {}", dir.display());
    Ok(())
}
