use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use cityfed_cli::commands::{apply_overrides, run_command};
use cityfed_cli::config::{parse_config, ExperimentConfig};
use cityfed_cli::CliError;

/// Cross-city federated transfer learning simulator.
#[derive(Parser)]
#[command(name = "cityfed", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Configuration file (defaults apply when omitted).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Overrides the config's seed list with a single seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output directory (overrides the config).
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Aggregation mode: plaintext or encrypted (overrides the config).
    #[arg(long, global = true)]
    mode: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the synthetic city datasets.
    Generate,
    /// Federated stage-I training over the source cities.
    Train,
    /// Stage II: impute the target's missing data and fine-tune the task model.
    Transfer,
    /// Score the transfer against ground truth.
    Evaluate,
    /// Run all six experiment variants per seed.
    Ablate,
    /// Sweep one hyperparameter: lambda, label_fraction, or client_count.
    Sweep { kind: String },
    /// Run generate, train, transfer, and evaluate in order.
    All,
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig, CliError> {
    let mut cfg = match &cli.config {
        Some(path) => parse_config(path)?,
        None => ExperimentConfig::default(),
    };
    apply_overrides(&mut cfg, cli.seed, cli.out.as_deref(), cli.mode.as_deref())?;
    Ok(cfg)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();

    let (name, sweep_kind) = match &cli.command {
        Command::Generate => ("generate", None),
        Command::Train => ("train", None),
        Command::Transfer => ("transfer", None),
        Command::Evaluate => ("evaluate", None),
        Command::Ablate => ("ablate", None),
        Command::Sweep { kind } => ("sweep", Some(kind.as_str())),
        Command::All => ("all", None),
    };

    let result = load_config(&cli).and_then(|cfg| run_command(name, sweep_kind, &cfg));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
