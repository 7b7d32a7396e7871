//! `vertisync` command-line front end.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::{Engine, ExperimentConfig, Overrides};

#[derive(Parser)]
#[command(name = "vertisync", version, about = "Conflict-free eVTOL takeoff scheduling experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Experiment configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Run a single seed instead of the configured list.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, conflicts_with = "constructive")]
    exact: bool,
    #[arg(long, global = true)]
    constructive: bool,
    /// Relative optimality gap for the exact engine.
    #[arg(long, global = true)]
    gap: Option<f64>,
    /// Cycle horizon override in minutes.
    #[arg(long = "mk-minutes", global = true)]
    mk_minutes: Option<f64>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// List service vectors with their classes and fleet bounds.
    Enumerate,
    /// Region membership along a demand ray.
    Regions,
    /// Stochastic simulation, one output directory per seed.
    Simulate,
    /// Bisection for the empirical throughput along a ray.
    Sweep,
    /// Program size formula and built counts.
    Size,
    /// Plan a single cycle for a queue snapshot.
    Schedule,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let Some(path) = cli.config.clone() else {
        eprintln!("error: --config is required");
        return ExitCode::from(2);
    };
    let engine = match (cli.exact, cli.constructive) {
        (true, _) => Some(Engine::Exact),
        (_, true) => Some(Engine::Constructive),
        _ => None,
    };
    let ov = Overrides { seed: cli.seed, out: cli.out.clone(), engine, gap: cli.gap, mk_minutes: cli.mk_minutes };
    let result = ExperimentConfig::load(&path, &ov).and_then(|cfg| match cli.command {
        Command::Enumerate => commands::enumerate(&cfg).map(|_| 0),
        Command::Regions => commands::regions(&cfg).map(|_| 0),
        Command::Simulate => commands::simulate(&cfg).map(|_| 0),
        Command::Sweep => commands::sweep(&cfg).map(|_| 0),
        Command::Size => commands::size(&cfg).map(|_| 0),
        Command::Schedule => commands::schedule(&cfg),
    });
    match result {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
