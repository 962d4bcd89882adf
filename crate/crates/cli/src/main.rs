mod config;
mod error;
mod output;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use dilate_core::generators::presets;

use crate::error::CliError;

/// Build, simulate and check time-dependent dilations of open-system dynamics.
#[derive(Parser)]
#[command(name = "dilate-forge", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the stages listed in a configuration file.
    Run {
        config: PathBuf,
        /// `dotted.key=value`, applied before validation; repeatable.
        #[arg(long = "override", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        /// Output directory, replacing `output.directory`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the preset catalog as JSON.
    Presets,
    /// Check a configuration without running it.
    Validate {
        config: PathBuf,
        #[arg(long = "override", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
}

/// Environment variable capping the worker thread count.
const THREADS_VAR: &str = "DILATE_FORGE_THREADS";

fn configure_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var(THREADS_VAR) else {
        return Ok(());
    };
    let n: usize = raw.trim().parse().ok().filter(|&n| n > 0).ok_or_else(|| {
        CliError::Validation(format!(
            "{THREADS_VAR} must be a positive integer, got '{raw}'"
        ))
    })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Validation(format!("{THREADS_VAR}: {e}")))
}

fn read_config(path: &PathBuf, overrides: &[String]) -> Result<config::Validated, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::io(format!("reading {}", path.display()), e))?;
    config::load(&text, overrides)
}

fn execute(cli: Cli) -> Result<(), CliError> {
    configure_threads()?;
    match cli.command {
        Command::Presets => {
            let text =
                serde_json::to_string_pretty(&presets::catalog()).expect("catalog serializes");
            println!("{text}");
        }
        Command::Validate { config, overrides } => {
            let v = read_config(&config, &overrides)?;
            let stages: Vec<&str> = v.stages.iter().map(|s| s.name()).collect();
            println!(
                "valid: {} steps on [{}, {}], stages {stages:?}, hash {}",
                v.grid.n_steps, v.grid.t_start, v.grid.t_end, v.hash
            );
        }
        Command::Run {
            config,
            overrides,
            out,
        } => {
            let v = read_config(&config, &overrides)?;
            let dir = out.unwrap_or_else(|| v.config.output.directory.clone());
            let manifest = run::run(&v, &dir)?;
            println!(
                "wrote {} files to {}",
                manifest.outputs.len() + 1,
                dir.display()
            );
            for w in &manifest.warnings {
                println!("warning: {w}");
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
