//! `cmc-forge`: command-line front end for the k-noid construction.
//!
//! Every subcommand reads an optional flat JSON config, lays its flags over
//! it and writes its outputs plus `manifest.json` into `--out`.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod config;
mod helicoid;
mod lift;
mod output;
mod period;
mod problem;
mod solve;
mod trace;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand};
use cmc_forge::Error;
use serde::de::DeserializeOwned;
use serde::Serialize;

use config::{resolve, usage, Usage};
use output::OutDir;

#[derive(Parser)]
#[command(name = "cmc-forge", version, about = "Minimal graphs in Nil and CMC k-noids in H²×R")]
struct Cli {
    /// JSON file with flat keys; flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Worker threads for scans.
    #[arg(long, global = true, env = "CMC_FORGE_JOBS")]
    jobs: Option<usize>,
    /// Print the resolved config and exit.
    #[arg(long, global = true)]
    dry_run: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Helicoid mesh and `(u, ψ, G)` table.
    Helicoid(helicoid::HelicoidArgs),
    /// Horizontal lift of a base loop and its holonomy.
    Lift(lift::LiftArgs),
    /// Solve the graph equation on a model problem.
    Solve(solve::SolveArgs),
    /// Conormal and sister data along one edge of a solved graph.
    Trace(trace::TraceArgs),
    /// First period `p(b)` on a grid, checkpointed per row.
    PeriodScan(period::ScanArgs),
    /// Root of the first period in `b` (given `a`) or in `a` (given `b`).
    Period1(period::Period1Args),
    /// Second period at the hinge angle for `k`.
    Period2(period::KArgs),
    /// Both periods, the report and the fundamental piece.
    Knoid(period::KArgs),
}

fn execute<C: Serialize + DeserializeOwned>(
    cli: &Cli,
    name: &str,
    flags: &impl Serialize,
    run: impl FnOnce(&C, &mut OutDir) -> Result<()>,
) -> Result<()> {
    let config: C = resolve(cli.config.as_deref(), flags)?;
    if cli.dry_run {
        println!("{}", serde_json::to_string_pretty(&config)?);
        return Ok(());
    }
    let mut out = OutDir::create(&cli.out)?;
    run(&config, &mut out)?;
    out.finish(name, &config)
}

fn run(cli: &Cli) -> Result<()> {
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            return Err(usage("--jobs must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global()?;
    }
    match &cli.command {
        Command::Helicoid(a) => execute(cli, "helicoid", a, helicoid::run),
        Command::Lift(a) => execute(cli, "lift", a, lift::run),
        Command::Solve(a) => execute(cli, "solve", a, solve::run),
        Command::Trace(a) => execute(cli, "trace", a, trace::run),
        Command::PeriodScan(a) => execute(cli, "period-scan", a, |c, out| period::run_scan(c, a.resume, out)),
        Command::Period1(a) => execute(cli, "period1", a, period::run_period1),
        Command::Period2(a) => execute(cli, "period2", a, period::run_period2),
        Command::Knoid(a) => execute(cli, "knoid", a, period::run_knoid),
    }
}

/// 2 for bad input, 3 for solver failures, 1 for everything else.
fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.is::<Usage>() {
            return 2;
        }
        if let Some(e) = cause.downcast_ref::<Error>() {
            return match e {
                Error::NewtonStagnation { .. }
                | Error::RootNotConverged { .. }
                | Error::NoBracket { .. }
                | Error::SingularJacobian(_)
                | Error::NotMonotone { .. }
                | Error::LevelSetMissesCorner { .. } => 3,
                Error::Io(_) | Error::Json(_) => 1,
                _ => 2,
            };
        }
    }
    1
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
