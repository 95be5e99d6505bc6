//! `afsob`: run one solver or diagnostic from a problem-config JSON.
//!
//! Exit status: 0 success, 2 solver did not converge, 3 config error,
//! 4 I/O error, 1 anything else.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::{Parser, ValueEnum};
use serde_json::json;

use crate::config::ProblemConfig;

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Io(String),
    NoConvergence(String),
    Numerical(String),
}

impl CliError {
    fn status(&self) -> u8 {
        match self {
            CliError::Numerical(_) => 1,
            CliError::NoConvergence(_) => 2,
            CliError::Config(_) => 3,
            CliError::Io(_) => 4,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
            CliError::NoConvergence(m) => write!(f, "no convergence: {m}"),
            CliError::Numerical(m) => write!(f, "{m}"),
        }
    }
}

impl From<affine_sobolev::Error> for CliError {
    fn from(e: affine_sobolev::Error) -> Self {
        use affine_sobolev::Error as E;
        match e {
            E::Io(_) | E::Format(_) => CliError::Io(e.to_string()),
            E::NoConvergence { .. } | E::Stagnation(_) => CliError::NoConvergence(e.to_string()),
            E::NonFinite(_) | E::NotPositiveDefinite => CliError::Numerical(e.to_string()),
            _ => CliError::Config(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Command {
    Energy,
    #[value(name = "j2-check")]
    J2Check,
    Invariance,
    Poisson,
    #[value(name = "ground-state")]
    GroundState,
    Penalty,
    #[value(name = "critical-check")]
    CriticalCheck,
    Profiles,
    Liminf,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Energy => "energy",
            Command::J2Check => "j2-check",
            Command::Invariance => "invariance",
            Command::Poisson => "poisson",
            Command::GroundState => "ground-state",
            Command::Penalty => "penalty",
            Command::CriticalCheck => "critical-check",
            Command::Profiles => "profiles",
            Command::Liminf => "liminf",
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "afsob", version, about = "Affine Sobolev energies, affine Laplacian solvers and diagnostics")]
struct Args {
    command: Command,
    /// Problem-config JSON; relative paths inside it resolve against its directory.
    #[arg(long)]
    config: PathBuf,
    /// Output directory for report.json, trace.csv, meta.json and fields/.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; results do not depend on it.
    #[arg(long)]
    threads: Option<usize>,
    /// Also write fields/*.afld.
    #[arg(long)]
    emit_fields: bool,
    /// Print a summary to stderr.
    #[arg(short, long, action = clap::ArgAction::Count)]
    verbose: u8,
}

fn run(args: &Args) -> Result<u8, CliError> {
    let started = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    let clock = Instant::now();
    let text = std::fs::read_to_string(&args.config)
        .map_err(|e| CliError::Io(format!("{}: {e}", args.config.display())))?;
    let cfg = ProblemConfig::parse(&text)?;
    let seed = args.seed.unwrap_or(cfg.seed);
    let threads = args.threads.unwrap_or(0);
    if threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| CliError::Config(e.to_string()))?;
    }
    let base = args.config.parent().map(PathBuf::from).unwrap_or_default();
    let name = args.command.name();
    let outcome = commands::run(name, &cfg, seed, &base)?;
    let meta = json!({
        "command": name,
        "version": env!("CARGO_PKG_VERSION"),
        "seed": seed,
        "threads": rayon::current_num_threads(),
        "started_unix": started,
        "wall_time_s": clock.elapsed().as_secs_f64(),
        "converged": outcome.converged,
    });
    output::write_all(&args.out, &outcome, &meta, args.emit_fields)?;
    if args.verbose > 0 {
        eprintln!("{name}: {}", serde_json::to_string_pretty(&outcome.report).unwrap_or_default());
    }
    Ok(if outcome.converged { 0 } else { 2 })
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            let code = match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                _ => 3,
            };
            return ExitCode::from(code);
        }
    };
    match run(&args) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("afsob: {e}");
            ExitCode::from(e.status())
        }
    }
}
