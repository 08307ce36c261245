use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use skewlab::runner::workers_from_env;
use skewlab::{run_command, Command, ExperimentConfig, RunError};

#[derive(Parser)]
#[command(
    name = "skewlab",
    version,
    about = "Lyapunov exponents, holonomies and the pinching/twisting criterion for symbolic skew products"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(clap::Args)]
struct Io {
    /// Experiment configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Output directory for the CSV file.
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Cmd {
    /// Integrated Lyapunov exponent over random orbits.
    Exponent(Io),
    /// Fiber-bunching margin.
    Bunching(Io),
    /// Holonomy truncation increments with their envelope.
    Holonomy(Io),
    /// Pinching and twisting at the configured periodic point.
    Criterion(Io),
    /// Twist perturbation sweep.
    Sweep(Io),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (cmd, io) = match cli.cmd {
        Cmd::Exponent(io) => (Command::Exponent, io),
        Cmd::Bunching(io) => (Command::Bunching, io),
        Cmd::Holonomy(io) => (Command::Holonomy, io),
        Cmd::Criterion(io) => (Command::Criterion, io),
        Cmd::Sweep(io) => (Command::Sweep, io),
    };
    let result = ExperimentConfig::from_path(&io.config)
        .map_err(RunError::from)
        .and_then(|cfg| {
            let workers = workers_from_env()?;
            run_command(cmd, &cfg, &io.out, workers)
        });
    match result {
        Ok(out) => {
            println!("{}", out.verdict);
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("skewlab {cmd}: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
