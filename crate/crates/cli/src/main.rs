use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use coopcell_cli::commands;
use coopcell_cli::{CliError, Settings};

#[derive(Parser)]
#[command(
    name = "coopcell",
    version,
    about = "Cooperative small-cell vehicular network model"
)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Master seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Monte Carlo trials.
    #[arg(long, global = true)]
    trials: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Flat `key = value` configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Parameter override, repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    set: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Cooperation probabilities and analytical coverage.
    Analytic,
    /// Monte Carlo coverage against the analytical value.
    Simulate,
    /// Handoff rates from simulated trajectories.
    Mobility,
    /// X2 overhead, capacity and overhead ratio.
    Overhead,
    /// Sweep a figure preset to CSV, manifest and SVG.
    Figure {
        /// fig2 ... fig11 or custom.
        preset: String,
    },
    /// Run the self-check suite.
    Validate,
    /// List configuration keys.
    Keys,
}

fn settings(c: &Common) -> Result<Settings, CliError> {
    let mut s = Settings::default();
    if let Some(path) = &c.config {
        s.apply_config_file(path)?;
    }
    for a in &c.set {
        s.apply_override(a)?;
    }
    if let Some(seed) = c.seed {
        s.seed = seed;
    }
    if let Some(trials) = c.trials {
        s.trials = trials;
    }
    Ok(s)
}

fn run(cli: Cli) -> Result<String, CliError> {
    let s = settings(&cli.common)?;
    let out = cli.common.out.as_deref();
    match cli.command {
        Command::Analytic => commands::analytic(&s, out),
        Command::Simulate => commands::simulate(&s, out),
        Command::Mobility => commands::mobility(&s, out),
        Command::Overhead => commands::overhead(&s, out),
        Command::Figure { preset } => commands::figure(&preset, &s, out),
        Command::Validate => commands::run_validate(&s, out),
        Command::Keys => Ok(coopcell_cli::config::KEYS
            .iter()
            .map(|(k, d)| format!("{k:<18} {d}\n"))
            .collect()),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(text) => {
            print!("{text}");
            ExitCode::SUCCESS
        }
        Err(CliError::Validation(report)) => {
            print!("{report}");
            eprintln!("validation failed");
            ExitCode::from(3)
        }
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
