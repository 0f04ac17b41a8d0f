//! Command-line front-end: training, generation, simulated transports,
//! metric reports and physiological indexes.

pub mod config;
pub mod generate;
pub mod manifest;
pub mod metrics;
pub mod physio;
pub mod simulate;
pub mod train;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_COLLISION: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "dmpscale", version, about = "Personalized transport trajectories with force-driven speed scaling")]
pub struct Cli {
    /// JSON file with default parameters.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Seed for every random draw; recorded in outputs.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads for independent manifest entries.
    #[arg(long, global = true, default_value_t = 1)]
    pub jobs: usize,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    Train(train::TrainArgs),
    Generate(generate::GenerateArgs),
    Simulate(simulate::SimulateArgs),
    Metrics(metrics::MetricsArgs),
    Physio(physio::PhysioArgs),
}

/// Runs a parsed command line.
pub fn run(cli: Cli) -> anyhow::Result<()> {
    let settings = config::Settings::load(cli.config.as_deref(), cli.seed)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.jobs.max(1))
        .build()?;
    pool.install(|| match cli.command {
        Command::Train(args) => train::run(&args, &settings),
        Command::Generate(args) => generate::run(&args, &settings),
        Command::Simulate(args) => simulate::run(&args, &settings),
        Command::Metrics(args) => metrics::run(&args, &settings),
        Command::Physio(args) => physio::run(&args, &settings),
    })
}

/// Exit status for a failed run.
pub fn exit_code(err: &anyhow::Error) -> i32 {
    let collision = err
        .chain()
        .any(|e| matches!(e.downcast_ref::<dmpscale::Error>(), Some(dmpscale::Error::Collision(_))));
    if collision {
        EXIT_COLLISION
    } else {
        EXIT_ERROR
    }
}
