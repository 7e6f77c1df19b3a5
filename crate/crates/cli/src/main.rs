use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use parimarket::harness::{self, ExperimentConfig, Overrides};
use parimarket::Error;

/// Runs seeded parimutuel market experiments.
#[derive(Parser)]
#[command(name = "parimarket", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment and write its records, summary and aggregate report.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        replicas: Option<usize>,
        #[arg(long)]
        rounds: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        thin: Option<usize>,
        /// Run replicas one after another instead of in parallel.
        #[arg(long)]
        serial: bool,
    },
    /// Check a config without running it.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Re-aggregate the summary table of a finished run.
    Report {
        #[arg(long = "in")]
        input: PathBuf,
    },
}

const CONFIG_ERROR: u8 = 1;
const RUNTIME_ERROR: u8 = 2;

fn load(path: &Path, overrides: &Overrides) -> Result<ExperimentConfig, Error> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config { path: String::new(), message: format!("cannot read {}: {e}", path.display()) })?;
    let mut config = ExperimentConfig::parse_unchecked(&text)?;
    config.apply(overrides);
    config.validate()?;
    Ok(config)
}

fn execute(command: Command) -> Result<(), Error> {
    match command {
        Command::Run { config, seed, replicas, rounds, out, thin, serial } => {
            let config = load(&config, &Overrides { seed, replicas, rounds, out, thin })?;
            let report = harness::run_experiment(&config, !serial)?;
            println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
        }
        Command::Validate { config } => {
            let config = load(&config, &Overrides::default())?;
            println!("config ok ({} agents, {} rounds, {} replicas, hash {})", config.agents.len(), config.rounds, config.replicas, config.hash());
        }
        Command::Report { input } => {
            let report = harness::report(&input)?;
            println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { CONFIG_ERROR } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_config() { CONFIG_ERROR } else { RUNTIME_ERROR })
        }
    }
}
