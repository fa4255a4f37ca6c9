//! `dirac-edge`: spectra, edge states, spectral flow and edge conductivity of
//! the half-plane Dirac operator from the command line.
//!
//! Exit codes: 0 on success, 1 for invalid input, 2 when a numerical
//! cross-check fails. `DIRAC_EDGE_THREADS` caps the worker threads.

mod commands;
mod config;
mod output;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::RunConfig;

#[derive(Debug, Parser)]
#[command(name = "dirac-edge", version, about, allow_negative_numbers = true)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Bulk band edges and gap eigenvalues over a momentum range (CSV).
    Dispersion(Common),
    /// Edge state wavefunction at one momentum (CSV).
    Gapstate(Common),
    /// Spectral flow of the gap branches (JSON).
    Flow(Common),
    /// Edge conductivity by both current methods and the flow (JSON).
    Conductivity(Common),
    /// Flow under a seeded family of random perturbations (JSON).
    PerturbScan(Common),
    /// Bands and flow for a perturbation periodic along the edge (CSV).
    Bloch(Common),
    /// Runs the acceptance criteria.
    Selftest(Common),
}

#[derive(Debug, clap::Args)]
struct Common {
    /// JSON file whose fields override the flags.
    #[arg(long)]
    config: Option<std::path::PathBuf>,
    #[command(flatten)]
    run: RunConfig,
}

/// Failure of a command, split by exit code.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Check(String),
}

impl From<dirac_edge::Error> for CliError {
    fn from(e: dirac_edge::Error) -> Self {
        use dirac_edge::Error as E;
        match e {
            E::InvalidParameter(_)
            | E::OffUnitCircle(_)
            | E::Grid(_)
            | E::WindowOutsideGap { .. }
            | E::NoGapState { .. } => CliError::Usage(e.to_string()),
            _ => CliError::Check(e.to_string()),
        }
    }
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(v) = std::env::var("DIRAC_EDGE_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .map_err(|_| CliError::Usage(format!("DIRAC_EDGE_THREADS must be a count, got `{v}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Usage(e.to_string()))
}

type Runner = fn(&RunConfig) -> Result<(), CliError>;

fn dispatch(cli: Cli) -> Result<(), CliError> {
    configure_threads()?;
    let (run, common): (Runner, Common) = match cli.command {
        Command::Dispersion(c) => (commands::dispersion, c),
        Command::Gapstate(c) => (commands::gapstate, c),
        Command::Flow(c) => (commands::flow, c),
        Command::Conductivity(c) => (commands::conductivity, c),
        Command::PerturbScan(c) => (commands::perturb_scan, c),
        Command::Bloch(c) => (commands::bloch, c),
        Command::Selftest(c) => (commands::selftest, c),
    };
    let cfg = match &common.config {
        Some(path) => common.run.overlay_file(path)?,
        None => common.run,
    };
    run(&cfg)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(CliError::Check(msg)) => {
            eprintln!("check failed: {msg}");
            ExitCode::from(2)
        }
    }
}
