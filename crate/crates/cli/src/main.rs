use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use insider_cli::config::{self, Overrides};
use insider_cli::{commands, verify, HarnessError};

#[derive(Parser)]
#[command(name = "insider", version, about = "Insider-trading optimal portfolio experiments")]
struct Cli {
    /// TOML configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed; overrides the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Number of simulated paths.
    #[arg(long, global = true)]
    paths: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Tabulate M, Φ and Ψ over the (t, y) grid.
    Density,
    /// Tabulate the log-optimal insider policy.
    Policy,
    /// Simulate insider and Merton wealth.
    Simulate,
    /// Solve one first-order condition.
    Foc,
    /// Solve the budget constraint for c(y).
    SolveC,
    /// Run the invariant suite.
    Verify,
}

fn run(cli: Cli) -> Result<(), HarnessError> {
    let overrides = Overrides { seed: cli.seed, output_dir: cli.out, n_paths: cli.paths };
    let cfg = config::load(cli.config.as_deref(), &overrides)?;
    let written = match cli.command {
        Command::Density => commands::run_density(&cfg)?,
        Command::Policy => commands::run_policy(&cfg)?,
        Command::Simulate => commands::run_simulate(&cfg)?,
        Command::Foc => commands::run_foc(&cfg)?,
        Command::SolveC => commands::run_solve_c(&cfg)?,
        Command::Verify => {
            let (path, report) = verify::run_verify(&cfg)?;
            for e in &report.entries {
                let status = if e.passed { "PASS" } else { "FAIL" };
                eprintln!("{status} {}::{} {}", e.module, e.name, e.detail);
            }
            println!("{}", path.display());
            if !report.passed {
                return Err(HarnessError::InvariantFailure { failures: report.failures });
            }
            return Ok(());
        }
    };
    for path in written {
        println!("{}", path.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
