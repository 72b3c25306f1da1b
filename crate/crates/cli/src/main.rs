//! `geoequiv` command-line front end.
//!
//! Exit codes: 0 positive result, 1 computed negative result (see the report),
//! 2 usage or input error.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

mod commands;

#[derive(Parser, Debug)]
#[command(name = "geoequiv", version, about = "Geodesic equivalence toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// Grid spec `lo:hi:count,...`, or a bare count to refine the input chart.
    #[arg(long)]
    grid: Option<String>,
    /// Tolerance; each command has its own default.
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory. Without it the report goes to stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Jets {
    Exact,
    Fit,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Sample geodesics of a metric and write a family file.
    Generate {
        #[arg(long)]
        metric: PathBuf,
        /// Explicit target points `x0,x1,...;x0,x1,...`; default is every grid node.
        #[arg(long)]
        targets: Option<String>,
        #[arg(long, default_value_t = 12)]
        n_curves: usize,
        #[arg(long, value_enum, default_value_t = Jets::Exact)]
        jets: Jets,
        #[command(flatten)]
        common: Common,
    },
    /// Reconstruct the canonical connection from a geodesic family.
    Reconstruct {
        #[arg(long)]
        family: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Recover a Ricci-flat metric from a connection (or from a metric's connection).
    Recover {
        #[arg(long, conflicts_with = "metric", required_unless_present = "metric")]
        connection: Option<PathBuf>,
        #[arg(long)]
        metric: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Pointwise rigidity rank test.
    Rigidity {
        #[arg(long)]
        metric: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Glue building blocks from a recipe file.
    Glue {
        #[arg(long)]
        blocks: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Test two metrics for geodesic equivalence.
    Verify {
        #[arg(long)]
        metric: PathBuf,
        #[arg(long)]
        partner: PathBuf,
        #[command(flatten)]
        common: Common,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(cli.command) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
