//! Command-line entry point: `run`, `validate`, and `sweep` over scenario
//! configs.

mod config;
mod output;
mod scenario;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use thiserror::Error;

use config::ScenarioConfig;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    fn from_core(e: attractor_core::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

#[derive(Parser)]
#[command(
    name = "attractor",
    about = "Dissipative Liouville dynamics lab: spectral bases, coupling tensors, attractor evolutions, eigenvalue flows",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Execute a scenario config and write its outputs
    Run { config: PathBuf },
    /// Parse and validate a config without running anything
    Validate { config: PathBuf },
    /// Re-run a scenario over a list of values for one config key
    Sweep {
        config: PathBuf,
        /// dotted key to override, e.g. dynamics.epsilon or basis.d
        #[arg(long)]
        param: String,
        /// comma-separated values
        #[arg(long)]
        values: String,
    },
}

fn main() -> ExitCode {
    match dispatch() {
        Ok(all_passed) => {
            if all_passed {
                ExitCode::SUCCESS
            } else {
                eprintln!("error: hard invariants failed");
                ExitCode::from(2)
            }
        }
        Err(e @ CliError::Config(_)) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn dispatch() -> Result<bool, CliError> {
    let cli = Cli::parse();
    match cli.command {
        Command::Run { config } => {
            let cfg = ScenarioConfig::load(&config)?;
            let report = scenario::run_scenario(&cfg)?;
            report.print();
            Ok(report.all_passed())
        }
        Command::Validate { config } => {
            let cfg = ScenarioConfig::load(&config)?;
            cfg.validate()?;
            println!("config ok: scenario '{}'", cfg.scenario.name());
            Ok(true)
        }
        Command::Sweep {
            config,
            param,
            values,
        } => {
            let text = std::fs::read_to_string(&config)
                .map_err(|e| CliError::Config(format!("cannot read {}: {e}", config.display())))?;
            let base: toml::Value = text
                .parse()
                .map_err(|e| CliError::Config(format!("unparseable config: {e}")))?;

            let mut all = true;
            for raw in values.split(',').map(str::trim).filter(|s| !s.is_empty()) {
                let mut doc = base.clone();
                set_key(&mut doc, &param, raw)?;
                let mut cfg: ScenarioConfig = doc
                    .try_into()
                    .map_err(|e| CliError::Config(format!("override {param}={raw}: {e}")))?;
                // each sweep value writes into its own subdirectory
                let sub = format!("sweep_{}_{}", param.replace('.', "_"), raw);
                cfg.output.dir = cfg.output.dir.join(sub);
                if let Some(base_dir) = config.parent() {
                    let _ = base_dir; // input-relative rebasing applied by load(); sweep reparses
                }
                println!("== {param} = {raw}");
                let report = scenario::run_scenario(&cfg)?;
                report.print();
                all &= report.all_passed();
            }
            Ok(all)
        }
    }
}

/// Set a dotted key in a TOML document to a scalar parsed from `raw`
/// (integer, then float, then boolean, then string).
fn set_key(doc: &mut toml::Value, dotted: &str, raw: &str) -> Result<(), CliError> {
    let parsed: toml::Value = if let Ok(i) = raw.parse::<i64>() {
        toml::Value::Integer(i)
    } else if let Ok(f) = raw.parse::<f64>() {
        toml::Value::Float(f)
    } else if let Ok(b) = raw.parse::<bool>() {
        toml::Value::Boolean(b)
    } else {
        toml::Value::String(raw.to_string())
    };

    let mut node = doc;
    let parts: Vec<&str> = dotted.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        let table = node
            .as_table_mut()
            .ok_or_else(|| CliError::Config(format!("{dotted}: not a table at '{part}'")))?;
        if i == parts.len() - 1 {
            table.insert(part.to_string(), parsed);
            return Ok(());
        }
        node = table
            .entry(part.to_string())
            .or_insert(toml::Value::Table(Default::default()));
    }
    Err(CliError::Config(format!("empty parameter name '{dotted}'")))
}
