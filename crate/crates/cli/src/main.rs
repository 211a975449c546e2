//! `cvqkd`: rate tables, distillation runs, tomography and slice
//! optimisation from a JSON experiment config.

mod commands;
mod config;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::Value;

use crate::error::CliError;
use crate::output::OutDir;

#[derive(Parser)]
#[command(
    name = "cvqkd",
    version,
    about = "Coherent-state QKD rate analysis and key distillation"
)]
struct Cli {
    /// Experiment config (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; results do not depend on it.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Output directory (default: the config's out_dir, else the current directory).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Error and EPR rate table over the configured losses.
    Rates,
    /// Simulated reconciliation and privacy amplification.
    Distill,
    /// Channel estimation from simulated homodyne samples.
    Tomography,
    /// Optimise the slice boundaries for the configured loss.
    Optimize,
    /// Recompute leakage totals from a distillation transcript.
    VerifyTranscript {
        transcript: PathBuf,
        /// Distillation report to check the totals against.
        #[arg(long)]
        report: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> Result<Value, CliError> {
    if let Command::VerifyTranscript { transcript, report } = &cli.command {
        return commands::verify_transcript(transcript, report.as_deref());
    }
    let path = cli
        .config
        .as_deref()
        .ok_or_else(|| CliError::config_file("--config is required for this command"))?;
    let resolved = config::load(path, cli.seed, cli.workers)?;
    if let Some(n) = resolved.config.workers {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::config("workers", e.to_string()))?;
    }
    let root = cli
        .out
        .or_else(|| resolved.config.out_dir.clone())
        .unwrap_or_else(|| PathBuf::from("."));
    let mut out = OutDir::create(&root)?;
    let (name, result) = match cli.command {
        Command::Rates => ("rates", commands::rates(&resolved, &mut out)),
        Command::Distill => ("distill", commands::distill(&resolved, &mut out)),
        Command::Tomography => ("tomography", commands::tomography(&resolved, &mut out)),
        Command::Optimize => ("optimize", commands::optimize(&resolved, &mut out)),
        Command::VerifyTranscript { .. } => unreachable!(),
    };
    let files = out.written();
    if !files.is_empty() {
        eprintln!("{}", serde_json::json!({ "command": name, "files": files }));
    }
    let mut summary = result?;
    summary["command"] = Value::from(name);
    summary["config_hash"] = Value::from(resolved.hash.as_str());
    Ok(summary)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}", e.diagnostic());
            e.exit_code()
        }
    }
}
