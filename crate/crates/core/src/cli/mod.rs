//! Command-line front end. Each command reads one experiment config, writes
//! its artifacts under the output directory and finishes with
//! `manifest.json`, which lists every file, the config hash and the wall
//! times. Timestamps appear only in the manifest.
//!
//! Exit codes: 0 success, 1 input or configuration error, 2 non-convergence
//! or failed analysis (or a failed oracle comparison or sweep row), 3 oracle
//! refusal.

pub mod compare;
pub mod config;
pub mod run;
pub mod sweep;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::{Parser, Subcommand};
use serde::Serialize;
use sha2::{Digest, Sha256};

pub use config::ExperimentConfig;
pub use run::{execute, Artifacts, RunOutput};
pub use sweep::Param;

use crate::error::Error;
use crate::oracle::Verdict;

#[derive(Debug, Parser)]
#[command(name = "nlms", version, about = "Nonlocal minimal surface experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Overrides the config's output directory.
    #[arg(long, global = true)]
    pub output_dir: Option<PathBuf>,
    /// Overrides the config's seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads for the data-parallel kernels.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve the configured problem and run its analyses.
    Run { config: PathBuf },
    /// Compare the main solver with the exhaustive oracle.
    OracleCompare { config: PathBuf },
    /// Rerun the experiment for each value of one parameter.
    Sweep {
        config: PathBuf,
        #[arg(long, value_enum)]
        param: Param,
        #[arg(long, value_delimiter = ',', num_args = 0..)]
        values: Vec<f64>,
    },
}

/// Exit status for an error.
pub fn exit_code(e: &Error) -> u8 {
    match e {
        Error::OracleRefusal(_) => 3,
        Error::Singular | Error::Divergent(_) | Error::InsufficientRadii { .. } | Error::SteepGraph { .. } => 2,
        _ => 1,
    }
}

#[derive(Debug, Serialize)]
struct Manifest {
    tool: &'static str,
    version: &'static str,
    command: String,
    config: String,
    config_sha256: String,
    started_unix: f64,
    threads: usize,
    seed: u64,
    status: String,
    exit_code: u8,
    wall_seconds: BTreeMap<String, f64>,
    metrics: BTreeMap<String, f64>,
    files: Vec<String>,
    errors: Vec<String>,
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

struct Outcome {
    code: u8,
    metrics: BTreeMap<String, f64>,
    timings: BTreeMap<String, f64>,
    errors: Vec<String>,
}

impl Outcome {
    fn failed(e: &Error) -> Self {
        Self { code: exit_code(e), metrics: BTreeMap::new(), timings: BTreeMap::new(), errors: vec![e.to_string()] }
    }
}

fn load(cli: &Cli, path: &Path) -> Result<(ExperimentConfig, Vec<u8>), Error> {
    let (mut config, bytes, _) = ExperimentConfig::load(path)?;
    if let Some(seed) = cli.seed {
        config.seed = seed;
        config.solver.seed = seed;
    }
    if let Some(dir) = &cli.output_dir {
        config.output_dir = Some(dir.clone());
    }
    Ok((config, bytes))
}

fn dispatch(cli: &Cli, config: &ExperimentConfig, out: &mut Artifacts) -> Outcome {
    match &cli.command {
        Command::Run { .. } => match execute(config, out) {
            Ok(o) => Outcome { code: if o.succeeded() { 0 } else { 2 }, metrics: o.metrics, timings: o.timings, errors: o.errors },
            Err(e) => Outcome::failed(&e),
        },
        Command::OracleCompare { .. } => match compare::oracle_compare(config, out) {
            Ok(rows) => {
                let mut metrics = BTreeMap::new();
                for r in &rows {
                    metrics.insert(format!("{}_main", r.quantity), r.main);
                    metrics.insert(format!("{}_oracle", r.quantity), r.oracle);
                }
                let failed: Vec<String> = rows
                    .iter()
                    .filter(|r| r.verdict != Verdict::Pass)
                    .map(|r| format!("{}: {}", r.quantity, r.verdict))
                    .collect();
                Outcome { code: if failed.is_empty() { 0 } else { 2 }, metrics, timings: BTreeMap::new(), errors: failed }
            }
            Err(e) => Outcome::failed(&e),
        },
        Command::Sweep { param, values, .. } => match sweep::sweep(config, *param, values, out) {
            Ok(rows) => {
                let errors: Vec<String> = rows
                    .iter()
                    .filter(|r| r.failed())
                    .map(|r| match &r.outcome {
                        Ok(o) => format!("value {}: {}", r.value, o.errors.join("; ")),
                        Err(e) => format!("value {}: {e}", r.value),
                    })
                    .collect();
                let code = if errors.is_empty() { 0 } else { 2 };
                Outcome { code, metrics: BTreeMap::new(), timings: BTreeMap::new(), errors }
            }
            Err(e) => Outcome::failed(&e),
        },
    }
}

/// Runs a parsed command line and returns the process exit status.
pub fn run_cli(cli: &Cli) -> u8 {
    let clock = Instant::now();
    let started = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0.0, |d| d.as_secs_f64());
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("warning: thread pool already initialized: {e}");
        }
    }
    let (name, path) = match &cli.command {
        Command::Run { config } => ("run", config),
        Command::OracleCompare { config } => ("oracle-compare", config),
        Command::Sweep { config, .. } => ("sweep", config),
    };
    let (config, bytes) = match load(cli, path) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return exit_code(&e);
        }
    };
    let dir = config.output_dir.clone().unwrap_or_else(|| PathBuf::from("out"));
    let mut out = match Artifacts::new(&dir) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e}");
            return 1;
        }
    };
    let mut hashed = bytes;
    if let Command::Sweep { param, values, .. } = &cli.command {
        hashed.extend(format!("\n{param:?}={values:?}").bytes());
    }
    let outcome = dispatch(cli, &config, &mut out);
    for e in &outcome.errors {
        eprintln!("error: {e}");
    }
    let mut wall = outcome.timings;
    wall.insert("total".into(), clock.elapsed().as_secs_f64());
    let mut files = out.files.clone();
    files.push("manifest.json".into());
    let manifest = Manifest {
        tool: "nlms",
        version: env!("CARGO_PKG_VERSION"),
        command: name.into(),
        config: path.display().to_string(),
        config_sha256: sha256_hex(&hashed),
        started_unix: started,
        threads: rayon::current_num_threads(),
        seed: config.seed,
        status: if outcome.code == 0 { "ok".into() } else { "failed".into() },
        exit_code: outcome.code,
        wall_seconds: wall,
        metrics: outcome.metrics,
        files,
        errors: outcome.errors,
    };
    let text = serde_json::to_string_pretty(&manifest).unwrap_or_default() + "\n";
    let target = out.root().join("manifest.json");
    if let Err(e) = std::fs::write(&target, text) {
        eprintln!("error: {}", Error::io(target, e));
        return 1;
    }
    println!("{} {}: exit {} ({} files in {})", name, path.display(), outcome.code, manifest.files.len(), dir.display());
    outcome.code
}

pub fn main() -> ExitCode {
    ExitCode::from(run_cli(&Cli::parse()))
}
