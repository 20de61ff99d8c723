//! Command-line front end for the elimination engine.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod error;
pub mod report;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::commands::Invocation;
use crate::config::Mode;

#[derive(Debug, Parser)]
#[command(name = "alet", version, about = "Adaptive Lipschitz elimination on the torus")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the mode named in the config.
    Run(Common),
    /// Audit a quantum landscape.
    Audit(Common),
    /// Run the query-complexity bench.
    Bench(Common),
}

#[derive(Debug, Args)]
pub struct Common {
    /// TOML configuration file.
    #[arg(long)]
    pub config: PathBuf,
    /// Master seed, overriding the config.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads; 0 picks the number of cores.
    #[arg(long)]
    pub workers: Option<usize>,
    /// Output directory, overriding the config.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl Cli {
    pub fn invocation(self) -> Invocation {
        let (c, mode) = match self.command {
            Command::Run(c) => (c, None),
            Command::Audit(c) => (c, Some(Mode::LandscapeAudit)),
            Command::Bench(c) => (c, Some(Mode::Bench)),
        };
        Invocation {
            config: c.config,
            seed: c.seed,
            workers: c.workers,
            out: c.out,
            mode,
        }
    }
}

/// Runs one parsed invocation and returns the process exit code.
pub fn run(cli: Cli) -> i32 {
    match commands::execute(&cli.invocation()) {
        Ok(_) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
