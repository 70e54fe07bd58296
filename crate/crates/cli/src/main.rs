//! `wavelab`: exact moments, lower-bound certification, coupled Monte Carlo
//! and rate fits for spectral Galerkin approximations of the stochastic wave
//! equation.
//!
//! Exit codes: 0 success, 2 configuration error, 3 certification failure,
//! 4 numeric fault.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::json;

use crate::commands::CommandOutput;
use crate::config::RunConfig;
use crate::output::{unix_seconds, Manifest, OutputDir};

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Io(String),
    Numeric(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Io(_) => 2,
            CliError::Numeric(_) => 4,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
            CliError::Numeric(m) => write!(f, "numeric fault: {m}"),
        }
    }
}

impl From<wavelab::Error> for CliError {
    fn from(e: wavelab::Error) -> Self {
        match e {
            wavelab::Error::NumericFault(_) => CliError::Numeric(e.to_string()),
            _ => CliError::Config(e.to_string()),
        }
    }
}

const EXIT_CERTIFICATION: u8 = 3;

#[derive(Debug, Parser)]
#[command(name = "wavelab", version, about = "Weak-error laboratory for the spectral Galerkin stochastic wave equation")]
struct Cli {
    /// JSON config file (a run manifest is accepted too)
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Output directory
    #[arg(long, global = true, value_name = "DIR", default_value = "wavelab-out")]
    out: PathBuf,
    /// Overrides the seed of the config
    #[arg(long, global = true, value_name = "U64")]
    seed: Option<u64>,
    /// Worker threads for Monte Carlo; results do not depend on it
    #[arg(long, global = true, value_name = "INT")]
    threads: Option<usize>,
    /// Also write an SVG figure where the command has one
    #[arg(long, global = true)]
    plot: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, Subcommand)]
enum Command {
    /// Exact moments, gaps and every analytic bound per level
    Exact,
    /// Coupled Monte Carlo weak errors with certified lower bounds
    Mc,
    /// Log-log rate fit and rate sandwich
    Rates,
    /// Path quadrature against the closed-form mode moments
    Oracle,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Exact => "exact",
            Command::Mc => "mc",
            Command::Rates => "rates",
            Command::Oracle => "oracle",
        }
    }
}

fn run(cli: &Cli) -> Result<u8, CliError> {
    let started = unix_seconds();
    let path = cli.config.as_ref().ok_or_else(|| CliError::Config("--config PATH is required".into()))?;
    let mut cfg = RunConfig::load(path)?;
    if let Some(seed) = cli.seed {
        cfg.seed = Some(seed);
    }
    if cli.threads == Some(0) {
        return Err(CliError::Config("--threads must be >= 1".into()));
    }
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(t) = cli.threads {
        builder = builder.num_threads(t);
    }
    let pool = builder.build().map_err(|e| CliError::Config(format!("cannot start worker threads: {e}")))?;
    let result: CommandOutput = pool.install(|| match cli.command {
        Command::Exact => commands::exact(&cfg),
        Command::Mc => commands::mc(&cfg),
        Command::Rates => commands::rates(&cfg, cli.plot),
        Command::Oracle => commands::oracle(&cfg),
    })?;

    let code = if result.failures.is_empty() { 0 } else { EXIT_CERTIFICATION };
    let mut out = OutputDir::create(&cli.out)?;
    out.write(&format!("{}.csv", result.name), &result.table.to_csv()?)?;
    if let Some(svg) = &result.svg {
        out.write(&format!("{}.svg", result.name), svg.as_bytes())?;
    }
    let report_name = format!("{}.json", result.name);
    let mut outputs = out.files().to_vec();
    outputs.push(report_name.clone());
    outputs.push("manifest.json".into());
    let manifest = Manifest {
        tool: "wavelab",
        version: env!("CARGO_PKG_VERSION"),
        command: cli.command.name(),
        seed: cfg.seed(),
        config: cfg,
        threads: cli.threads,
        started_unix_seconds: started,
        finished_unix_seconds: unix_seconds(),
        outputs,
        tolerances: result.tolerances.clone(),
        exit_code: code,
    };
    let report = json!({
        "command": result.name,
        "rows": result.table.to_json(),
        "details": result.extra,
        "failures": result.failures,
        "manifest": manifest,
    });
    out.write_json(&report_name, &report)?;
    out.write_json("manifest.json", &manifest)?;

    for f in &result.failures {
        eprintln!("certification failure: {f}");
    }
    println!(
        "{}: {} rows written to {} ({})",
        result.name,
        result.table.rows.len(),
        cli.out.display(),
        if code == 0 { "all checks passed" } else { "certification failed" }
    );
    Ok(code)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("wavelab: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
