//! `urllc-lab`: reproducible experiments on fading channels, channel
//! prediction and cooperative relaying protocols.

mod fading_cmd;
mod output;
mod predict_cmd;
mod protocol_cmd;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use serde::Serialize;

use output::{Manifest, Outputs};

/// Environment variable that overrides `--seed`.
pub const SEED_ENV: &str = "URLLC_LAB_SEED";

#[derive(Debug, Parser)]
#[command(name = "urllc-lab", version, about = "Fading, prediction and relaying-protocol experiments")]
struct Cli {
    /// Master seed for every random stream (URLLC_LAB_SEED overrides it).
    #[arg(long, global = true, default_value_t = 1)]
    seed: u64,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Directory for output files and the run manifest.
    #[arg(long, global = true, default_value = "results")]
    out: PathBuf,
    /// Record wall-clock times (outputs then differ between runs).
    #[arg(long, global = true)]
    timing: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
enum Command {
    /// Fading-process experiments.
    #[command(subcommand)]
    Fading(fading_cmd::FadingCmd),
    /// Channel-quality prediction experiments.
    #[command(subcommand)]
    Predict(predict_cmd::PredictCmd),
    /// Relaying-protocol reliability.
    #[command(subcommand)]
    Protocol(protocol_cmd::ProtocolCmd),
}

/// Errors the user can fix by changing the invocation.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

/// Settings shared by every command.
pub struct Context {
    pub seed: u64,
    pub timing: bool,
}

fn resolve_seed(flag: u64) -> anyhow::Result<u64> {
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| usage(format!("{SEED_ENV}={v:?} is not a nonnegative integer"))),
        Err(_) => Ok(flag),
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<UsageError>().is_some() {
        return 2;
    }
    match err.downcast_ref::<urllc_core::Error>() {
        Some(
            urllc_core::Error::InvalidParameter { .. }
            | urllc_core::Error::Scenario(_)
            | urllc_core::Error::UnreachableReliability { .. }
            | urllc_core::Error::AnalyticUnsupported
            | urllc_core::Error::TrajectoryExitsRoom { .. },
        ) => 2,
        _ => 3,
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let start = Instant::now();
    let seed = resolve_seed(cli.seed)?;
    if let Some(t) = cli.threads {
        if t == 0 {
            return Err(usage("--threads must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new().num_threads(t).build_global()?;
    }
    let ctx = Context {
        seed,
        timing: cli.timing,
    };
    let mut out = Outputs::new(&cli.out)?;
    match &cli.command {
        Command::Fading(c) => fading_cmd::run(c, &ctx, &mut out)?,
        Command::Predict(c) => predict_cmd::run(c, &ctx, &mut out)?,
        Command::Protocol(c) => protocol_cmd::run(c, &ctx, &mut out)?,
    }
    let manifest = Manifest::new(&cli.command, seed, out.files(), cli.timing.then(|| start.elapsed().as_secs_f64()))?;
    out.write_manifest(&manifest)?;
    for f in out.files() {
        println!("{}", cli.out.join(f).display());
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
