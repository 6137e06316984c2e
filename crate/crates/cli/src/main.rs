//! `decolab` command-line front end.
//!
//! Exit codes: 0 success, 1 runtime or numerical failure (including a failed
//! symmetry verdict), 2 usage or configuration error.

mod dyson_cmd;
mod fit_cmd;
mod manifest;
mod simulate;
mod symcheck;

use clap::{Parser, Subcommand};
use std::process::ExitCode;

/// Marks an error as a usage/configuration problem (exit code 2).
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

#[derive(Parser)]
#[command(name = "decolab", version, about = "Dephasing dynamics and decoherence-factor fits")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Trajectory ensemble against the master equation, plus a convergence table.
    Simulate(simulate::Args),
    /// Decoherence-gain surface over a (Γ, Δω) grid.
    Dyson(dyson_cmd::Args),
    /// Fit a cross-section model.
    Fit(fit_cmd::Args),
    /// Check a channel family for CP or CPT invariance.
    Symcheck(symcheck::Args),
}

fn configure_threads() -> anyhow::Result<()> {
    if let Ok(v) = std::env::var("DECOLAB_THREADS") {
        let n: usize = v
            .trim()
            .parse()
            .map_err(|_| usage(format!("DECOLAB_THREADS must be a positive integer, got {v:?}")))?;
        if n == 0 {
            return Err(usage("DECOLAB_THREADS must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

fn run(cli: Cli) -> anyhow::Result<()> {
    configure_threads()?;
    match cli.command {
        Command::Simulate(a) => simulate::run(a),
        Command::Dyson(a) => dyson_cmd::run(a),
        Command::Fit(a) => fit_cmd::run(a),
        Command::Symcheck(a) => symcheck::run(a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<UsageError>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
