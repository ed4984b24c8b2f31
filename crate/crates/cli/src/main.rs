//! `memulsion`: desk-scale runs of the copolymer-in-emulsion toolkit.
//!
//! Exit codes: 0 success, 1 compute error, 2 bad parameters, 3 invariant
//! violation.

mod commands;
mod util;

use clap::{Parser, Subcommand};
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "memulsion",
    version,
    about = "Path entropies, interface free energies, column free energies and the \
             mesoscopic ratio bound for a copolymer in an emulsion of random blocks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Exact crossing counts and the entropy per step of a column
    Kappa(commands::KappaArgs),
    /// Quenched free energy near a single flat interface
    Phi(commands::PhiArgs),
    /// Quenched free energy of one column crossing (direct and variational)
    Psi(commands::PsiArgs),
    /// Sample a block field and empirical column-type measures
    Measures(commands::MeasuresArgs),
    /// Variational lower bound on the quenched free energy
    Varfe(commands::VarfeArgs),
    /// Direct finite-size free energy of the full model
    Simulate(commands::SimulateArgs),
    /// Run the oracle cross-validation suite
    Selfcheck(commands::SelfcheckArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Kappa(args) => commands::run_kappa(args),
        Command::Phi(args) => commands::run_phi(args),
        Command::Psi(args) => commands::run_psi(args),
        Command::Measures(args) => commands::run_measures(args),
        Command::Varfe(args) => commands::run_varfe(args),
        Command::Simulate(args) => commands::run_simulate(args),
        Command::Selfcheck(args) => commands::run_selfcheck(args),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.exit_code())
        }
    }
}
