//! `midclass`: endogenous middle-class identification from percentile
//! income shares.
//!
//! Every subcommand writes its tables (CSV plus a JSON mirror), SVG plots
//! and a `manifest.json` into `--out`. Exit codes: 0 success, 2 input
//! error, 3 numerical or degenerate-design error, 4 integrity error.

mod commands;
mod input;
mod output;
mod svg;

use std::process::ExitCode;

use clap::{ArgAction, Parser, Subcommand};
use midclass_core::ErrorClass;

use commands::{
    betamap::BetamapArgs, democracy::DemocracyArgs, ingest::IngestArgs, midclass::MidclassArgs,
    simulate::SimulateArgs, synth::SynthPanelArgs, timeseries::TimeseriesArgs,
};

#[derive(Parser, Debug)]
#[command(name = "midclass", version, about = "Inequality-insensitive middle classes from percentile income shares")]
struct Cli {
    /// More log output (-v info, -vv debug)
    #[arg(short, long, action = ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Zero-inflated Pareto Monte Carlo: societies, shares and share-vs-Gini scatters
    Simulate(SimulateArgs),
    /// Slope of every interval share on an inequality index, with its zero frontier
    Betamap(BetamapArgs),
    /// Inequality-insensitive class of a given size, pooled or per country
    Midclass(MidclassArgs),
    /// Yearly cross-country class shares and counts of declining countries
    Timeseries(TimeseriesArgs),
    /// Five-year democracy regressions: percentile sweep or class comparison
    Democracy(DemocracyArgs),
    /// Load a share file (and covariates) into a checked binary panel cache
    Ingest(IngestArgs),
    /// Write a seeded synthetic share and covariate panel
    SynthPanel(SynthPanelArgs),
}

fn exit_code(err: &anyhow::Error) -> u8 {
    err.chain()
        .find_map(|c| c.downcast_ref::<midclass_core::Error>())
        .map_or(2, |e| match e.class() {
            ErrorClass::Input => 2,
            ErrorClass::Numerical => 3,
            ErrorClass::Integrity => 4,
        })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    let result = match &cli.command {
        Command::Simulate(a) => commands::simulate::run(a),
        Command::Betamap(a) => commands::betamap::run(a),
        Command::Midclass(a) => commands::midclass::run(a),
        Command::Timeseries(a) => commands::timeseries::run(a),
        Command::Democracy(a) => commands::democracy::run(a),
        Command::Ingest(a) => commands::ingest::run(a),
        Command::SynthPanel(a) => commands::synth::run(a),
    };
    match result {
        Ok(dir) => {
            println!("wrote {}", dir.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
