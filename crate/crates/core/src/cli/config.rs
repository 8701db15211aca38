use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::analysis::{default_steps, DEFAULT_EPSILONS};
use crate::gasket::{contains, Boundary, GasketSpec, Vertex};
use crate::spectral::{DEFAULT_DENSE_CAP, DEFAULT_EMPIRICAL_HORIZON};

use super::{CliError, CommandKind};

/// Largest generation the runner accepts; g = 12 already has ~800k vertices.
pub const MAX_GENERATION: u32 = 12;

pub const DEFAULT_TVD_HORIZON: u64 = 5000;
pub const DEFAULT_TVD_FIT_START: f64 = 20.0;
pub const DEFAULT_VERIFY_STEPS: u64 = 1000;

/// Which initial vertex (or vertices) a run starts from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StartSpec {
    BottomCenter,
    All,
    At(Vertex),
}

impl StartSpec {
    pub fn resolve(self, spec: GasketSpec) -> Option<Vertex> {
        match self {
            StartSpec::BottomCenter => Some(spec.bottom_center()),
            StartSpec::At(v) => Some(v),
            StartSpec::All => None,
        }
    }
}

impl fmt::Display for StartSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StartSpec::BottomCenter => f.write_str("bottom-center"),
            StartSpec::All => f.write_str("all"),
            StartSpec::At(v) => write!(f, "{},{}", v.x, v.y),
        }
    }
}

impl FromStr for StartSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim() {
            "all" => Ok(StartSpec::All),
            "bottom-center" | "center" => Ok(StartSpec::BottomCenter),
            other => {
                let (x, y) = other
                    .split_once(',')
                    .ok_or_else(|| format!("expected \"x,y\", \"all\" or \"bottom-center\", got {other:?}"))?;
                let x = x.trim().parse::<i64>().map_err(|e| format!("bad x coordinate {x:?}: {e}"))?;
                let y = y.trim().parse::<i64>().map_err(|e| format!("bad y coordinate {y:?}: {e}"))?;
                Ok(StartSpec::At(Vertex::new(x, y)))
            }
        }
    }
}

impl Serialize for StartSpec {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for StartSpec {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Experiment configuration, read from a JSON file and/or command-line flags.
///
/// Optional fields fall back to per-command defaults in [`ExperimentConfig::resolve`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub generation: u32,
    pub boundary: Option<Boundary>,
    pub start: Option<StartSpec>,
    pub steps: Option<u64>,
    /// Number of Cesàro steps for `tvd` and `mixing`.
    pub horizon: Option<u64>,
    /// Horizon of the empirical limiting distribution when the dense route is unavailable.
    pub limit_horizon: u64,
    pub epsilons: Vec<f64>,
    pub window: Option<(f64, f64)>,
    /// Generations scanned by `mixing`; defaults to `[generation]`.
    pub generations: Option<Vec<u32>>,
    pub output: PathBuf,
    pub dense_oracle: bool,
    pub dense_cap: usize,
    pub workers: Option<usize>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            generation: 4,
            boundary: None,
            start: None,
            steps: None,
            horizon: None,
            limit_horizon: DEFAULT_EMPIRICAL_HORIZON,
            epsilons: DEFAULT_EPSILONS.to_vec(),
            window: None,
            generations: None,
            output: PathBuf::from("out"),
            dense_oracle: true,
            dense_cap: DEFAULT_DENSE_CAP,
            workers: None,
        }
    }
}

fn invalid(field: &str, message: impl Into<String>) -> CliError {
    CliError::Config {
        field: field.to_string(),
        message: message.into(),
    }
}

impl ExperimentConfig {
    pub fn from_json_file(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| invalid("config", format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| invalid("config", format!("{}: {e}", path.display())))
    }

    pub fn spec(&self) -> GasketSpec {
        GasketSpec::new(self.generation, self.boundary.unwrap_or(Boundary::Periodic))
    }

    /// Fill per-command defaults and validate every field.
    pub fn resolve(mut self, command: CommandKind) -> Result<Self, CliError> {
        if self.generation > MAX_GENERATION {
            return Err(invalid(
                "generation",
                format!("{} exceeds the supported maximum {MAX_GENERATION}", self.generation),
            ));
        }
        let g = self.generation;
        match command {
            CommandKind::Simulate | CommandKind::Sweep => {
                self.boundary.get_or_insert(Boundary::Reflective);
                self.steps.get_or_insert(default_steps(g).max(1));
            }
            CommandKind::Limiting | CommandKind::Tvd | CommandKind::Mixing => {
                self.boundary.get_or_insert(Boundary::Periodic);
            }
            CommandKind::Verify => {
                self.steps.get_or_insert(DEFAULT_VERIFY_STEPS);
            }
        }
        if matches!(command, CommandKind::Tvd | CommandKind::Mixing) {
            self.horizon.get_or_insert(DEFAULT_TVD_HORIZON);
        }
        let default_start = if command == CommandKind::Sweep {
            StartSpec::All
        } else {
            StartSpec::BottomCenter
        };
        let start = *self.start.get_or_insert(default_start);
        if command == CommandKind::Mixing {
            self.generations.get_or_insert_with(|| vec![g]);
        }

        if self.steps == Some(0) {
            return Err(invalid("steps", "must be at least 1"));
        }
        if self.horizon == Some(0) {
            return Err(invalid("horizon", "must be at least 1"));
        }
        if self.limit_horizon == 0 {
            return Err(invalid("limit_horizon", "must be at least 1"));
        }
        if self.workers == Some(0) {
            return Err(invalid("workers", "must be at least 1"));
        }
        if self.epsilons.is_empty() {
            return Err(invalid("epsilons", "at least one value is required"));
        }
        if let Some(e) = self.epsilons.iter().find(|e| !(**e > 0.0 && **e < 1.0)) {
            return Err(invalid("epsilons", format!("{e} is outside (0, 1)")));
        }
        if let Some((lo, hi)) = self.window {
            if !(lo > 0.0 && lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(invalid("window", format!("[{lo}, {hi}] must satisfy 0 < lo < hi")));
            }
        }

        match (command, start) {
            (CommandKind::Sweep, StartSpec::All) => {}
            (CommandKind::Sweep, _) => return Err(invalid("start", "sweep runs over every vertex; use \"all\"")),
            (_, StartSpec::All) => {
                return Err(invalid("start", format!("\"all\" is only valid for sweep, not {command}")))
            }
            (CommandKind::Mixing, StartSpec::At(_)) => {
                return Err(invalid("start", "mixing starts from the bottom-center vertex of each generation"))
            }
            (_, StartSpec::At(v)) => {
                if !contains(g, v.x, v.y) {
                    return Err(invalid("start", format!("{v} is not on the generation-{g} gasket")));
                }
            }
            _ => {}
        }

        if command == CommandKind::Sweep {
            let steps = self.steps.unwrap_or(1);
            if steps > 1u64 << g {
                return Err(invalid("steps", format!("{steps} exceeds the pre-saturation cutoff 2^g = {}", 1u64 << g)));
            }
            if self.boundary != Some(Boundary::Reflective) {
                return Err(invalid("boundary", "sweeps require reflective boundary conditions"));
            }
        }
        if command == CommandKind::Mixing {
            if self.boundary != Some(Boundary::Periodic) {
                return Err(invalid("boundary", "mixing times are defined for periodic boundary conditions"));
            }
            let gens = self.generations.as_deref().unwrap_or_default();
            if gens.is_empty() {
                return Err(invalid("generations", "at least one generation is required"));
            }
            if let Some(bad) = gens.iter().find(|&&x| x > MAX_GENERATION) {
                return Err(invalid("generations", format!("{bad} exceeds the supported maximum {MAX_GENERATION}")));
            }
            let mut sorted = gens.to_vec();
            sorted.sort_unstable();
            sorted.dedup();
            if sorted.len() != gens.len() {
                return Err(invalid("generations", "generations must be distinct"));
            }
        }
        Ok(self)
    }
}

/// Values given on the command line; each one overrides the file.
#[derive(Debug, Clone, Default, clap::Args)]
pub struct ConfigOverrides {
    /// JSON configuration file; flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Gasket generation g.
    #[arg(long = "g", alias = "generation")]
    pub generation: Option<u32>,
    /// Boundary condition: periodic or reflective.
    #[arg(long = "bc", alias = "boundary")]
    pub boundary: Option<Boundary>,
    /// Initial vertex as "x,y", "bottom-center", or "all" (sweep).
    #[arg(long)]
    pub start: Option<StartSpec>,
    /// Number of walk steps.
    #[arg(long)]
    pub steps: Option<u64>,
    /// Number of Cesàro steps for distance and mixing runs.
    #[arg(long)]
    pub horizon: Option<u64>,
    /// Horizon of the empirical limiting distribution.
    #[arg(long)]
    pub limit_horizon: Option<u64>,
    /// Comma-separated epsilon grid for mixing times.
    #[arg(long = "eps", value_delimiter = ',')]
    pub epsilons: Option<Vec<f64>>,
    /// Fit window as "t_min,t_max".
    #[arg(long, value_parser = parse_window)]
    pub window: Option<(f64, f64)>,
    /// Comma-separated generations for mixing scans.
    #[arg(long, value_delimiter = ',')]
    pub generations: Option<Vec<u32>>,
    /// Output directory.
    #[arg(long = "out", alias = "output")]
    pub output: Option<PathBuf>,
    /// Use dense/spectral oracles (true/false).
    #[arg(long = "dense", num_args = 0..=1, default_missing_value = "true")]
    pub dense_oracle: Option<bool>,
    /// Maximum port count for dense operators.
    #[arg(long = "cap")]
    pub dense_cap: Option<usize>,
    /// Worker threads for sweeps.
    #[arg(long, env = "GASKET_QW_WORKERS")]
    pub workers: Option<usize>,
}

fn parse_window(s: &str) -> Result<(f64, f64), String> {
    let (lo, hi) = s.split_once(',').ok_or_else(|| format!("expected \"t_min,t_max\", got {s:?}"))?;
    let lo = lo.trim().parse::<f64>().map_err(|e| format!("bad t_min: {e}"))?;
    let hi = hi.trim().parse::<f64>().map_err(|e| format!("bad t_max: {e}"))?;
    Ok((lo, hi))
}

impl ConfigOverrides {
    pub fn build(&self) -> Result<ExperimentConfig, CliError> {
        let mut c = match &self.config {
            Some(path) => ExperimentConfig::from_json_file(path)?,
            None => ExperimentConfig::default(),
        };
        if let Some(v) = self.generation {
            c.generation = v;
        }
        if let Some(v) = self.boundary {
            c.boundary = Some(v);
        }
        if let Some(v) = self.start {
            c.start = Some(v);
        }
        if let Some(v) = self.steps {
            c.steps = Some(v);
        }
        if let Some(v) = self.horizon {
            c.horizon = Some(v);
        }
        if let Some(v) = self.limit_horizon {
            c.limit_horizon = v;
        }
        if let Some(v) = &self.epsilons {
            c.epsilons = v.clone();
        }
        if let Some(v) = self.window {
            c.window = Some(v);
        }
        if let Some(v) = &self.generations {
            c.generations = Some(v.clone());
        }
        if let Some(v) = &self.output {
            c.output = v.clone();
        }
        if let Some(v) = self.dense_oracle {
            c.dense_oracle = v;
        }
        if let Some(v) = self.dense_cap {
            c.dense_cap = v;
        }
        if let Some(v) = self.workers {
            c.workers = Some(v);
        }
        Ok(c)
    }
}
