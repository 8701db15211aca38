//! Experiment runner behind the `gasket-qw` binary.
//!
//! Every command writes CSV artifacts plus a `manifest.json` into the output
//! directory. The manifest echoes the resolved configuration, so
//! `gasket-qw replay <manifest>` regenerates identical CSVs.

mod commands;
mod config;

use std::ffi::OsString;
use std::fmt;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::error::QwError;

pub use config::{ConfigOverrides, ExperimentConfig, StartSpec, MAX_GENERATION};

pub const MANIFEST_FILE: &str = "manifest.json";

pub const EXIT_OK: i32 = 0;
pub const EXIT_RUNTIME: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_CAP: i32 = 3;
pub const EXIT_VERIFY: i32 = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CommandKind {
    Simulate,
    Sweep,
    Limiting,
    Tvd,
    Mixing,
    Verify,
}

impl fmt::Display for CommandKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            CommandKind::Simulate => "simulate",
            CommandKind::Sweep => "sweep",
            CommandKind::Limiting => "limiting",
            CommandKind::Tvd => "tvd",
            CommandKind::Mixing => "mixing",
            CommandKind::Verify => "verify",
        };
        f.write_str(s)
    }
}

#[derive(Debug)]
pub enum CliError {
    Config { field: String, message: String },
    Cap(QwError),
    Verification(Vec<String>),
    Io { path: PathBuf, source: std::io::Error },
    Run(QwError),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config { .. } => EXIT_CONFIG,
            CliError::Cap(_) => EXIT_CAP,
            CliError::Verification(_) => EXIT_VERIFY,
            CliError::Io { .. } | CliError::Run(_) => EXIT_RUNTIME,
        }
    }

    fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config { field, message } => write!(f, "invalid configuration: {field}: {message}"),
            CliError::Cap(e) => write!(f, "cap exceeded: {e}"),
            CliError::Verification(failed) => write!(f, "verification failed: {}", failed.join(", ")),
            CliError::Io { path, source } => write!(f, "{}: {source}", path.display()),
            CliError::Run(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<QwError> for CliError {
    fn from(e: QwError) -> Self {
        match e {
            QwError::DimensionCap { .. } => CliError::Cap(e),
            QwError::UnknownVertex { .. } => CliError::Config {
                field: "start".into(),
                message: e.to_string(),
            },
            other => CliError::Run(other),
        }
    }
}

/// Record of one run; enough to replay it.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: CommandKind,
    pub config: ExperimentConfig,
    pub version: String,
    pub wall_time_seconds: f64,
    pub artifacts: Vec<String>,
    #[serde(default)]
    pub notes: Vec<String>,
}

impl RunManifest {
    pub fn read(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| CliError::Config {
            field: "manifest".into(),
            message: format!("{}: {e}", path.display()),
        })
    }
}

/// What a command produced, before the manifest is written.
#[derive(Debug, Default)]
pub struct RunOutcome {
    pub artifacts: Vec<String>,
    pub notes: Vec<String>,
    pub failures: Vec<String>,
}

#[derive(Debug, Parser)]
#[command(name = "gasket-qw", version, about = "Coined quantum walks on Sierpinski gaskets")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// σ(t) series from one start vertex, with its power-law fit.
    Simulate(ConfigOverrides),
    /// Diffusion exponents from every start vertex.
    Sweep(ConfigOverrides),
    /// Limiting distribution and its x-marginal.
    Limiting(ConfigOverrides),
    /// Distance of the time-averaged distribution to the limit, T = 1..horizon.
    Tvd(ConfigOverrides),
    /// Mixing times over an epsilon grid and generations.
    Mixing(ConfigOverrides),
    /// Oracle and invariant checks.
    Verify(ConfigOverrides),
    /// Re-run the command recorded in a manifest.
    Replay {
        manifest: PathBuf,
        /// Write artifacts here instead of the recorded directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Run a resolved configuration, writing artifacts and the manifest.
pub fn execute(command: CommandKind, config: ExperimentConfig) -> Result<RunManifest, CliError> {
    let config = config.resolve(command)?;
    let dir = config.output.clone();
    std::fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
    let started = Instant::now();

    let outcome = match config.workers {
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(n).build().map_err(|e| CliError::Config {
                field: "workers".into(),
                message: e.to_string(),
            })?;
            pool.install(|| commands::run(command, &config))
        }
        None => commands::run(command, &config),
    }?;

    let manifest = RunManifest {
        command,
        config,
        version: env!("CARGO_PKG_VERSION").to_string(),
        wall_time_seconds: started.elapsed().as_secs_f64(),
        artifacts: outcome.artifacts,
        notes: outcome.notes,
    };
    let path = dir.join(MANIFEST_FILE);
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    std::fs::write(&path, text + "\n").map_err(|e| CliError::io(&path, e))?;
    if outcome.failures.is_empty() {
        Ok(manifest)
    } else {
        Err(CliError::Verification(outcome.failures))
    }
}

pub fn replay(manifest: &Path, out: Option<PathBuf>) -> Result<RunManifest, CliError> {
    let recorded = RunManifest::read(manifest)?;
    let mut config = recorded.config;
    if let Some(dir) = out {
        config.output = dir;
    }
    execute(recorded.command, config)
}

fn dispatch(cli: Cli) -> Result<RunManifest, CliError> {
    let (kind, overrides) = match cli.command {
        Command::Replay { manifest, out } => return replay(&manifest, out),
        Command::Simulate(o) => (CommandKind::Simulate, o),
        Command::Sweep(o) => (CommandKind::Sweep, o),
        Command::Limiting(o) => (CommandKind::Limiting, o),
        Command::Tvd(o) => (CommandKind::Tvd, o),
        Command::Mixing(o) => (CommandKind::Mixing, o),
        Command::Verify(o) => (CommandKind::Verify, o),
    };
    execute(kind, overrides.build()?)
}

/// Parse `args` (including the program name), run, and return the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    match dispatch(cli) {
        Ok(manifest) => {
            for note in &manifest.notes {
                eprintln!("note: {note}");
            }
            eprintln!(
                "{}: wrote {} artifact(s) to {} in {:.3}s",
                manifest.command,
                manifest.artifacts.len() + 1,
                manifest.config.output.display(),
                manifest.wall_time_seconds
            );
            EXIT_OK
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
