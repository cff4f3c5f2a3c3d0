mod commands;
mod config;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::config::Config;
use crate::error::CliError;

/// Batch driver for the damped Navier-Stokes hemivariational solver.
#[derive(Debug, Parser)]
#[command(name = "cbfed", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Mesh and reduced-space statistics.
    MeshInfo(RunArgs),
    /// Discrete constants and the regime they certify.
    Constants(RunArgs),
    /// Picard iteration from zero.
    Solve(RunArgs),
    /// Continuation in the load from zero to the configured forcing.
    Homotopy(RunArgs),
    /// Regime map over one numeric config key.
    Sweep(RunArgs),
    /// Seeded inequality suite.
    Verify {
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 1000)]
        samples: usize,
        #[arg(long, default_value = "cbfed-out")]
        out: PathBuf,
    },
}

#[derive(Debug, Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long, default_value = "cbfed-out")]
    out: PathBuf,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Runs the solver even when the contraction certificate fails.
    #[arg(long)]
    force: bool,
}

impl RunArgs {
    fn load(&self) -> Result<Config, CliError> {
        let mut cfg = Config::load(&self.config)?;
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        cfg.solver.force |= self.force;
        Ok(cfg)
    }
}

/// Worker cap from `CBFED_THREADS`, or the machine's parallelism.
fn thread_budget() -> Result<usize, CliError> {
    match std::env::var("CBFED_THREADS") {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => {
                cbfed_core::par::set_max_threads(n);
                Ok(n)
            }
            _ => Err(CliError::BadConfig { line: None, msg: format!("CBFED_THREADS must be a positive integer, found `{v}`") }),
        },
        Err(_) => Ok(std::thread::available_parallelism().map_or(1, |n| n.get())),
    }
}

fn run(cli: Cli) -> Result<String, CliError> {
    let threads = thread_budget()?;
    match cli.command {
        Command::MeshInfo(a) => commands::mesh_info(&a.load()?, &a.out),
        Command::Constants(a) => commands::constants(&a.load()?, &a.out),
        Command::Solve(a) => commands::solve(&a.load()?, &a.out),
        Command::Homotopy(a) => commands::homotopy(&a.load()?, &a.out),
        Command::Sweep(a) => commands::sweep(&a.load()?, &a.out, threads),
        Command::Verify { seed, samples, out } => commands::verify(seed, samples, &out),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 4 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("cbfed: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
