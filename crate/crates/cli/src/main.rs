mod commands;
mod config;
mod table;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::Format;

/// Simulation and verification tools for the superintegrable lambda-deformed
/// oscillator.
#[derive(Debug, Parser)]
#[command(name = "lambda-osc", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Deformation parameter λ
    #[arg(long, allow_hyphen_values = true)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub omega: Option<f64>,
    /// Configuration-space dimension N
    #[arg(long)]
    pub n_dim: Option<usize>,
    #[arg(long)]
    pub hbar: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output file; standard output when omitted
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// JSON file with default values for any option
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Integrate a trajectory and write it as CSV
    Simulate(commands::SimulateArgs),
    /// Check brackets, involution and functional independence of the integrals
    Verify(commands::VerifyArgs),
    /// Tabulate the effective potential with its canonical coordinate
    EffectivePotential(commands::PotentialArgs),
    /// Tabulate the scalar curvature
    Curvature(commands::CurvatureArgs),
    /// Energy levels of the quantum hyperbolic oscillator
    Spectrum(commands::SpectrumArgs),
    /// Check the Stäckel-transformed free-motion symmetries
    StaeckelCheck(commands::StaeckelArgs),
}

/// A failed run together with its exit code: 2 for configuration and
/// parameter errors, 1 for numerical failures.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub fn config(message: impl Into<String>) -> Self {
        Self {
            code: 2,
            message: message.into(),
        }
    }

    pub fn numeric(message: impl Into<String>) -> Self {
        Self {
            code: 1,
            message: message.into(),
        }
    }
}

impl From<lambda_oscillator::Error> for Failure {
    fn from(e: lambda_oscillator::Error) -> Self {
        use lambda_oscillator::Error as E;
        match e {
            E::Parameter(_) | E::DimensionMismatch { .. } | E::FlatLimit | E::NotImplemented(_) => {
                Failure::config(e.to_string())
            }
            _ => Failure::numeric(e.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::numeric(format!("i/o error: {e}"))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(a) => commands::simulate(a),
        Command::Verify(a) => commands::verify(a),
        Command::EffectivePotential(a) => commands::effective_potential_cmd(a),
        Command::Curvature(a) => commands::curvature(a),
        Command::Spectrum(a) => commands::spectrum(a),
        Command::StaeckelCheck(a) => commands::staeckel_check(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
