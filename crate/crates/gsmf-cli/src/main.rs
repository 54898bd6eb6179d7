//! `gsmf`: dataset generation, single runs, parameter sweeps and the
//! diagnostics runner.
//!
//! Exit codes: 0 on convergence (or success), 2 when a run stops on an
//! iteration or time limit, 1 on any error.

mod check;
mod config;
mod run;
mod sweep;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::config::{Config, Overrides};

#[derive(Parser)]
#[command(name = "gsmf", version, about = "Generalized symmetric matrix factorization")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build the target matrix and write it as `M.mtx`.
    GenData(Common),
    /// Run the solver once; writes `trace.csv` and `summary.json`.
    Solve(Common),
    /// Run the `[sweep]` grid; writes `sweep.csv` and per-run traces.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Number of runs executed concurrently.
        #[arg(long, default_value_t = default_jobs())]
        jobs: usize,
    },
    /// Run the identity and diagnostics suite; writes `check.json`.
    Check(Common),
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides `[output] dir`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Solver seed (overrides `[solver] seed`).
    #[arg(long)]
    seed: Option<u64>,
    /// Keep per-iteration snapshots and audit the descent inequalities.
    #[arg(long)]
    audit: bool,
    /// Symmetrize the dataset noise.
    #[arg(long)]
    symmetrize_noise: bool,
}

impl Common {
    fn load(&self) -> anyhow::Result<Config> {
        let mut config = Config::load(&self.config)?;
        config.apply(&Overrides {
            out: self.out.clone(),
            seed: self.seed,
            audit: self.audit,
            symmetrize_noise: self.symmetrize_noise,
        });
        Ok(config)
    }
}

fn default_jobs() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("GSMF_LOG", "warn")).init();
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::GenData(c) => c.load().and_then(|cfg| run::gen_data(&cfg)),
        Command::Solve(c) => c.load().and_then(|cfg| run::solve(&cfg)),
        Command::Sweep { common, jobs } => common.load().and_then(|cfg| sweep::run(&cfg, *jobs)),
        Command::Check(c) => c.load().and_then(|cfg| check::run(&cfg)),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
