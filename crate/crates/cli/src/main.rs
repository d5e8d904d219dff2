//! `platoon` — run car-following experiments from the command line.
//!
//! Subcommands: `simulate` (one closed-loop episode), `perturb` (open-chain
//! perturbation test), `train` (DDPG on the configured scenario), `eval`
//! (checkpointed policy rollouts), `metrics` (recompute episode metrics from
//! a trajectory CSV), `table` (summarize runs side by side).
//!
//! Exit codes: 0 success, 1 runtime error, 2 configuration error,
//! 3 episode terminated by a collision.

mod args;
mod commands;
mod manifest;

use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "platoon",
    version,
    about = "Single-lane car-following simulator and trainer"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one episode and export trajectory plus episode metrics.
    Simulate(commands::simulate::SimulateArgs),
    /// Run the perturbation test: forced leader, platoon response analysis.
    Perturb(commands::perturb::PerturbArgs),
    /// Train the shared policy and write a checkpoint and learning curve.
    Train(commands::train::TrainArgs),
    /// Evaluate a checkpointed policy over several episodes.
    Eval(commands::eval::EvalArgs),
    /// Recompute episode metrics from a trajectory CSV.
    Metrics(commands::metrics::MetricsArgs),
    /// Summarize run directories into one comparison table.
    Table(commands::table::TableArgs),
}

fn main() {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(args) => commands::simulate::run(args),
        Command::Perturb(args) => commands::perturb::run(args),
        Command::Train(args) => commands::train::run(args),
        Command::Eval(args) => commands::eval::run(args),
        Command::Metrics(args) => commands::metrics::run(args),
        Command::Table(args) => commands::table::run(args),
    };
    let code = match result {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            classify(&err)
        }
    };
    std::process::exit(code);
}

/// Configuration mistakes exit with 2, everything else with 1.
fn classify(err: &anyhow::Error) -> i32 {
    use platoon_core::Error as E;
    match err.downcast_ref::<E>() {
        Some(
            E::NonPositiveDt(_)
            | E::NoSteps
            | E::EmptyRoster
            | E::UnorderedRoster(_)
            | E::OverlappingVehicles { .. }
            | E::BadVehicleLength(_)
            | E::BadVehicleSpeed(_)
            | E::UnknownController(_)
            | E::MissingCheckpoint
            | E::NegativeProfileSpeed { .. }
            | E::ProfileNeedsOpenChain
            | E::UnknownPreset(_)
            | E::BadOverride(_)
            | E::UnknownConfigKey(_)
            | E::ConfigParse(_)
            | E::Checkpoint(_),
        ) => 2,
        _ => 1,
    }
}
