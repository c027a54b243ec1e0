//! `innokde`: simulate functional autoregressions, fit the residual-based
//! innovation density and run the rate and CLT studies from a config file.

// `!(x > 0.0)` is deliberate: NaN must fail every range check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;
mod error;
mod output;

use clap::{Parser, Subcommand};
use config::{Origin, RawConfig};
use error::CliError;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Simulate a trajectory and write `trajectory.csv`.
    Simulate,
    /// Run the regression + density pipeline with checkpoints.
    Fit,
    /// Print the rate schedule table for the configured tail.
    Rates,
    /// Convergence study over `experiment.n_grid`.
    Convergence,
    /// Monte Carlo CLT study with `experiment.M` replicates.
    Clt,
    /// Invariant density by fixed-point iteration (d = 1).
    Stationary,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Fit => "fit",
            Command::Rates => "rates",
            Command::Convergence => "convergence",
            Command::Clt => "clt",
            Command::Stationary => "stationary",
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "innokde", version, about = "Residual-based recursive kernel density estimation")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Config file of `section.key = value` lines.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Override one key; repeatable, applied after the config file.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,

    /// Output directory (`io.out_dir`).
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,

    /// Base seed (`io.seed`).
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,

    /// Worker threads for replicate-level parallelism.
    #[arg(long, global = true, value_name = "N")]
    threads: Option<usize>,
}

fn load(cli: &Cli) -> Result<config::RunConfig, CliError> {
    let mut raw = match &cli.config {
        Some(path) => RawConfig::load(path)?,
        None => RawConfig::default(),
    };
    for pair in &cli.set {
        raw.set(pair)?;
    }
    if let Some(seed) = cli.seed {
        raw.insert("io.seed", &seed.to_string(), Origin::Flag);
    }
    if let Some(out) = &cli.out {
        raw.insert("io.out_dir", &out.to_string_lossy(), Origin::Flag);
    }
    config::resolve(&raw, cli.command)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    if let Some(threads) = cli.threads {
        if threads == 0 {
            eprintln!("error: --threads 0 violates threads >= 1");
            return ExitCode::from(1);
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .expect("thread pool is configured once");
    }
    let result = load(&cli).and_then(|cfg| commands::execute(cli.command, &cfg).map(|r| (cfg, r)));
    match result {
        Ok((cfg, (summary, written))) => {
            println!("{summary}");
            println!("wrote {} to {}", written.join(", "), cfg.out_dir.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
