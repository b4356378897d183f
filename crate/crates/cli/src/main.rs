//! Batch front-end for the toolkit: each subcommand reads a JSON experiment
//! config, runs one workload, and writes CSV tables plus JSON artifacts into
//! an output directory, together with a manifest that can be re-run.
//!
//! Exit codes: 0 success, 2 configuration or schema error, 3 numeric or
//! convergence failure, 4 resource cap exceeded.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rydqca_core::{Error, Result};

mod commands;
mod config;
mod output;

#[derive(Parser)]
#[command(
    name = "rydqca",
    version,
    about = "Compile, verify, and probe globally driven Rydberg automata",
    after_help = "Configs are JSON; a manifest.json from a previous run is \
                  accepted anywhere a config is. Unknown keys are rejected."
)]
struct Cli {
    /// Worker threads (overrides RYDQCA_THREADS; 1 pins a single worker).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compile a model into a pulse program and verify the result.
    Compile(RunArgs),
    /// Re-verify the pulse program of a saved compilation report.
    Verify(RunArgs),
    /// Map time-optimal pulse durations over a grid of target phases.
    GrapeScan(RunArgs),
    /// Measure the state-variance spreading diagnostic g(t).
    Chaos(RunArgs),
    /// Audit unwanted interaction tails of an atom array.
    Audit(RunArgs),
    /// Tabulate tetrahedral-ensemble moment operators.
    Moments(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// JSON config file (or a manifest from a previous run).
    config: PathBuf,

    /// Output directory; created if absent.
    #[arg(long, short, default_value = "out")]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("rydqca: {err}");
            ExitCode::from(exit_code(&err))
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    init_threads(cli.threads)?;
    match &cli.command {
        Command::Compile(args) => commands::compile::run(&args.config, &args.out),
        Command::Verify(args) => commands::verify::run(&args.config, &args.out),
        Command::GrapeScan(args) => commands::grape_scan::run(&args.config, &args.out),
        Command::Chaos(args) => commands::chaos::run(&args.config, &args.out),
        Command::Audit(args) => commands::audit::run(&args.config, &args.out),
        Command::Moments(args) => commands::moments::run(&args.config, &args.out),
    }
}

/// Flag first, then the RYDQCA_THREADS variable, then the rayon default.
fn init_threads(flag: Option<usize>) -> Result<()> {
    let count = match flag {
        Some(n) => Some(n),
        None => match std::env::var("RYDQCA_THREADS") {
            Ok(raw) => Some(raw.trim().parse::<usize>().map_err(|_| {
                Error::config(format!("RYDQCA_THREADS must be an integer, got {raw:?}"))
            })?),
            Err(_) => None,
        },
    };
    if let Some(n) = count {
        if n == 0 {
            return Err(Error::config("thread count must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::config(format!("thread pool setup failed: {e}")))?;
    }
    Ok(())
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Config(_)
        | Error::Geometry(_)
        | Error::Domain(_)
        | Error::Io(_)
        | Error::Serde(_) => 2,
        Error::Numeric(_) | Error::Compilation(_) => 3,
        Error::Resource { .. } => 4,
    }
}
