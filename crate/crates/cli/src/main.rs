//! `lpp`: command-line front end for the path-counting experiments.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 usage or domain error,
//! 3 resource refusal.

mod commands;
mod output;
mod settings;

use std::fmt;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use lpp_core::LppError;

use commands::Sub;
use output::Outputs;
use settings::{RunFlags, Settings};

/// Bad flags, config or overwrite refusal.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

#[derive(Parser)]
#[command(name = "lpp", version, about = "Path counts and last-passage estimates on Z^d x Z_+")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Invocation {
    #[command(flatten)]
    settings: Settings,
    #[command(flatten)]
    run: RunFlags,
}

#[derive(Subcommand)]
enum Command {
    /// Exact (endpoint, weight) tables for one environment.
    Count(Invocation),
    /// Maximal weight per step, M_n / n.
    EstimateM(Invocation),
    /// N_n(alpha)^(1/n) over replications.
    EstimateLambda(Invocation),
    /// Frequency of N_t(alpha) = 0 along t.
    ProbZero(Invocation),
    /// E[N^2] / E[N]^2.
    SecondMoment(Invocation),
    /// Power-law fit of M against p.
    Scaling(Invocation),
    /// Collision probability of two independent walks.
    Rho(Invocation),
    /// Annealed exponent and finite-n expected counts.
    PhiCurve(Invocation),
    /// Interchange families along maximal paths.
    InterchangeCheck(Invocation),
    /// Compare the count DP with brute-force enumeration.
    OracleValidate(Invocation),
    /// Rerun a manifest.
    Replay {
        #[arg(long)]
        manifest: PathBuf,
        /// Output directory (default: `replay/` next to the manifest).
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        force: bool,
    },
}

fn split(cmd: Command) -> (Sub, Invocation) {
    match cmd {
        Command::Count(i) => (Sub::Count, i),
        Command::EstimateM(i) => (Sub::EstimateM, i),
        Command::EstimateLambda(i) => (Sub::EstimateLambda, i),
        Command::ProbZero(i) => (Sub::ProbZero, i),
        Command::SecondMoment(i) => (Sub::SecondMoment, i),
        Command::Scaling(i) => (Sub::Scaling, i),
        Command::Rho(i) => (Sub::Rho, i),
        Command::PhiCurve(i) => (Sub::PhiCurve, i),
        Command::InterchangeCheck(i) => (Sub::InterchangeCheck, i),
        Command::OracleValidate(i) => (Sub::OracleValidate, i),
        Command::Replay { .. } => unreachable!(),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &anyhow::Error) -> u8 {
    if e.downcast_ref::<UsageError>().is_some() {
        return 2;
    }
    match e.downcast_ref::<LppError>() {
        Some(l) if l.is_resource() => 3,
        Some(LppError::Domain(_) | LppError::Config(_) | LppError::InvalidPath(_) | LppError::OutOfBounds { .. }) => 2,
        _ => 1,
    }
}

fn dispatch(cmd: Command) -> Result<()> {
    if let Command::Replay { manifest, out, force } = cmd {
        let m = output::read_manifest(&manifest)?;
        let sub = Sub::from_name(&m.subcommand)
            .ok_or_else(|| UsageError(format!("unknown subcommand {:?} in manifest", m.subcommand)))?;
        let out = out.unwrap_or_else(|| manifest.parent().unwrap_or(Path::new(".")).join("replay"));
        return execute(sub, m.settings, &out, force, false);
    }
    let (sub, inv) = split(cmd);
    let base = match &inv.run.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading {}", path.display()))
                .map_err(|e| UsageError(format!("{e:#}")))?;
            Settings::from_toml(&text)?
        }
        None => Settings::default(),
    };
    let settings = inv.settings.overlay(base)?;
    let out = inv.run.out.clone().unwrap_or_else(|| PathBuf::from("lpp-out"));
    execute(sub, settings, &out, inv.run.force, inv.run.dry_run)
}

fn execute(sub: Sub, settings: Settings, out: &Path, force: bool, dry_run: bool) -> Result<()> {
    let r = settings.resolve()?;
    if dry_run {
        let bytes = commands::estimate_memory(sub, &r)?;
        println!("{}", serde_json::to_string_pretty(&r.to_settings())?);
        println!("estimated peak memory per replication: {bytes} bytes");
        return Ok(());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(r.threads)
        .build()
        .context("building thread pool")?;
    let outputs = Outputs::prepare(out, sub.name(), &r.to_settings(), r.seed, sub.files(), force)?;
    outputs.write_manifest()?;
    let started = Instant::now();
    let text = pool.install(|| commands::run(sub, &r, &outputs))?;
    print!("{text}");
    outputs.finish(started.elapsed().as_secs_f64())
}
