use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use crate::analysis::{
    default_window, fit_power_law, mixing_scaling, mixing_time, sigma_points, sigma_series, sweep_exponents,
    tvd_series, write_tvd_csv, PowerLawFit,
};
use crate::evolution::{port_slots, QuantumWalk, WalkerState};
use crate::gasket::{Boundary, GasketSpec, Vertex};
use crate::observables::{probability, write_sigma_csv, ProbabilityField, TimeAverage};
use crate::spectral::{
    build_dense_unitary, empirical_limiting_distribution, exact_time_average, limiting, LimitSource,
    SpectralDecomposition,
};

use super::config::{ExperimentConfig, DEFAULT_TVD_FIT_START};
use super::{CliError, CommandKind, RunOutcome};

const UNITARITY_TOLERANCE: f64 = 1e-12;
const ORACLE_STEPS: u64 = 50;
const ORACLE_TOLERANCE: f64 = 1e-12;
const AVERAGE_HORIZON: u64 = 200;
const AVERAGE_TOLERANCE: f64 = 1e-8;
const NORM_TOLERANCE: f64 = 1e-10;

pub(super) fn run(command: CommandKind, config: &ExperimentConfig) -> Result<RunOutcome, CliError> {
    let mut out = Outputs {
        dir: &config.output,
        outcome: RunOutcome::default(),
    };
    match command {
        CommandKind::Simulate => simulate(config, &mut out)?,
        CommandKind::Sweep => sweep(config, &mut out)?,
        CommandKind::Limiting => limiting_cmd(config, &mut out)?,
        CommandKind::Tvd => tvd_cmd(config, &mut out)?,
        CommandKind::Mixing => mixing(config, &mut out)?,
        CommandKind::Verify => verify(config, &mut out)?,
    }
    Ok(out.outcome)
}

struct Outputs<'a> {
    dir: &'a Path,
    outcome: RunOutcome,
}

impl Outputs<'_> {
    fn write(&mut self, name: &str, body: impl FnOnce(&mut BufWriter<File>) -> io::Result<()>) -> Result<(), CliError> {
        let path = self.dir.join(name);
        let wrap = |e| CliError::io(&path, e);
        let mut w = BufWriter::new(File::create(&path).map_err(wrap)?);
        body(&mut w).map_err(wrap)?;
        w.flush().map_err(wrap)?;
        self.outcome.artifacts.push(name.to_string());
        Ok(())
    }

    fn note(&mut self, note: impl Into<String>) {
        self.outcome.notes.push(note.into());
    }
}

const FIT_HEADER: &str = "prefactor,exponent,walk_dimension,t_min,t_max,residual,points";

fn fit_row(fit: &PowerLawFit) -> String {
    format!(
        "{},{},{},{},{},{},{}",
        fit.prefactor,
        fit.exponent,
        fit.walk_dimension(),
        fit.t_min,
        fit.t_max,
        fit.residual,
        fit.points
    )
}

fn start_vertex(config: &ExperimentConfig, spec: GasketSpec) -> Vertex {
    config
        .start
        .and_then(|s| s.resolve(spec))
        .unwrap_or_else(|| spec.bottom_center())
}

fn simulate(config: &ExperimentConfig, out: &mut Outputs) -> Result<(), CliError> {
    let spec = config.spec();
    let walk = QuantumWalk::new(spec);
    let start = start_vertex(config, spec);
    let steps = config.steps.unwrap_or(1);
    let series = sigma_series(&walk, start, steps)?;
    out.write("sigma.csv", |w| write_sigma_csv(&series, w))?;
    let window = config.window.unwrap_or_else(|| default_window(steps));
    match fit_power_law(&sigma_points(&series), window) {
        Ok(fit) => out.write("fit.csv", |w| {
            writeln!(w, "{FIT_HEADER}")?;
            writeln!(w, "{}", fit_row(&fit))
        })?,
        Err(e) => out.note(format!("no power-law fit: {e}")),
    }
    Ok(())
}

fn sweep(config: &ExperimentConfig, out: &mut Outputs) -> Result<(), CliError> {
    let walk = QuantumWalk::new(config.spec());
    let steps = config.steps.unwrap_or(1);
    let window = config.window.unwrap_or_else(|| default_window(steps));
    let result = sweep_exponents(&walk, steps, window)?;
    out.write("per_vertex.csv", |w| result.write_per_vertex_csv(w))?;
    out.write("histogram.csv", |w| result.histogram.write_csv(w))?;
    out.write("mean_series.csv", |w| result.write_mean_series_csv(w))?;
    out.write("mean_fit.csv", |w| {
        writeln!(w, "{FIT_HEADER}")?;
        writeln!(w, "{}", fit_row(&result.mean_fit))
    })?;

    let by_exponent = |a: &&crate::analysis::VertexExponent, b: &&crate::analysis::VertexExponent| {
        a.fit.exponent.total_cmp(&b.fit.exponent)
    };
    let slowest = result.per_vertex.iter().min_by(by_exponent);
    let fastest = result.per_vertex.iter().max_by(by_exponent);
    out.write("summary.csv", |w| {
        writeln!(w, "quantity,x,y,value")?;
        writeln!(w, "vertices,,,{}", result.per_vertex.len())?;
        writeln!(w, "mean_fit_prefactor,,,{}", result.mean_fit.prefactor)?;
        writeln!(w, "mean_fit_exponent,,,{}", result.mean_fit.exponent)?;
        writeln!(w, "mean_of_exponents,,,{}", result.mean_of_exponents)?;
        if let (Some(lo), Some(hi)) = (slowest, fastest) {
            writeln!(w, "min_exponent,{},{},{}", lo.vertex.x, lo.vertex.y, lo.fit.exponent)?;
            writeln!(w, "max_exponent,{},{},{}", hi.vertex.x, hi.vertex.y, hi.fit.exponent)?;
        }
        Ok(())
    })?;
    Ok(())
}

/// Limiting distribution for `config`, noting where it came from.
fn limit_for(
    config: &ExperimentConfig,
    walk: &QuantumWalk,
    initial: &WalkerState,
    out: &mut Outputs,
) -> Result<(ProbabilityField, LimitSource), CliError> {
    let ports = walk.graph().port_count();
    let g = walk.graph().generation();
    let (field, source) = if config.dense_oracle {
        limiting(walk, initial, config.dense_cap, config.limit_horizon)?
    } else {
        let h = config.limit_horizon;
        (empirical_limiting_distribution(walk, initial, h)?, LimitSource::Empirical { horizon: h })
    };
    match source {
        LimitSource::Spectral => out.note(format!("g={g}: limiting distribution from the spectral decomposition")),
        LimitSource::Empirical { horizon } => out.note(format!(
            "g={g}: limiting distribution approximated by the time average at T={horizon} ({ports} ports, dense cap {}, dense oracle {})",
            config.dense_cap,
            if config.dense_oracle { "on" } else { "off" }
        )),
    }
    Ok((field, source))
}

fn limiting_cmd(config: &ExperimentConfig, out: &mut Outputs) -> Result<(), CliError> {
    let spec = config.spec();
    let walk = QuantumWalk::new(spec);
    let initial = walk.initial_state(start_vertex(config, spec))?;
    let (pi, _) = limit_for(config, &walk, &initial, out)?;
    out.write("limiting.csv", |w| pi.write_csv(w))?;
    out.write("limiting_x.csv", |w| pi.write_x_marginal_csv(w))?;
    Ok(())
}

fn tvd_cmd(config: &ExperimentConfig, out: &mut Outputs) -> Result<(), CliError> {
    let spec = config.spec();
    let walk = QuantumWalk::new(spec);
    let initial = walk.initial_state(start_vertex(config, spec))?;
    let (pi, _) = limit_for(config, &walk, &initial, out)?;
    let horizon = config.horizon.unwrap_or(1);
    let series = tvd_series(&walk, &initial, pi.values(), horizon)?;
    out.write("tvd.csv", |w| write_tvd_csv(&series, w))?;
    let window = config.window.unwrap_or((DEFAULT_TVD_FIT_START, horizon as f64));
    let points: Vec<(f64, f64)> = series.iter().map(|&(t, d)| (t as f64, d)).collect();
    match fit_power_law(&points, window) {
        Ok(fit) => out.write("tvd_fit.csv", |w| {
            writeln!(w, "{FIT_HEADER}")?;
            writeln!(w, "{}", fit_row(&fit))
        })?,
        Err(e) => out.note(format!("no power-law fit of the distance: {e}")),
    }
    Ok(())
}

fn mixing(config: &ExperimentConfig, out: &mut Outputs) -> Result<(), CliError> {
    let boundary = config.boundary.unwrap_or(Boundary::Periodic);
    let horizon = config.horizon.unwrap_or(1);
    let generations = config.generations.clone().unwrap_or_else(|| vec![config.generation]);
    let mut rows = Vec::new();
    for &g in &generations {
        let spec = GasketSpec::new(g, boundary);
        let walk = QuantumWalk::new(spec);
        let initial = walk.initial_state(spec.bottom_center())?;
        let (pi, source) = limit_for(config, &walk, &initial, out)?;
        let results = mixing_time(&walk, &initial, pi.values(), source, &config.epsilons, horizon)?;
        for r in results {
            if r.tau.is_none() {
                out.note(format!("g={g}: not mixed within horizon {horizon} at epsilon {}", r.epsilon));
            }
            rows.push((walk.graph().len(), r.epsilon, r.tau));
        }
    }
    out.write("mixing.csv", |w| {
        writeln!(w, "N,epsilon,tau")?;
        for (n, eps, tau) in &rows {
            match tau {
                Some(t) => writeln!(w, "{n},{eps},{t}")?,
                None => writeln!(w, "{n},{eps},NA")?,
            }
        }
        Ok(())
    })?;

    if generations.len() < 3 {
        out.note("scaling fit skipped: needs at least 3 generations");
        return Ok(());
    }
    let mut fits = Vec::new();
    for &eps in &config.epsilons {
        let points: Option<Vec<(usize, u64)>> = rows
            .iter()
            .filter(|r| r.1 == eps)
            .map(|&(n, _, tau)| tau.map(|t| (n, t)))
            .collect();
        match points.map(|p| mixing_scaling(&p)) {
            Some(Ok(fit)) => fits.push((eps, fit)),
            Some(Err(e)) => out.note(format!("scaling fit at epsilon {eps} failed: {e}")),
            None => out.note(format!("scaling fit at epsilon {eps} skipped: some generation did not mix")),
        }
    }
    out.write("mixing_fit.csv", |w| {
        writeln!(w, "epsilon,prefactor,exponent,residual,points")?;
        for (eps, fit) in &fits {
            writeln!(w, "{eps},{},{},{},{}", fit.prefactor, fit.exponent, fit.residual, fit.points)?;
        }
        Ok(())
    })?;
    Ok(())
}

struct Check {
    name: &'static str,
    boundary: Boundary,
    value: f64,
    tolerance: f64,
}

impl Check {
    fn passed(&self) -> bool {
        self.value <= self.tolerance
    }
}

fn max_amplitude_error(a: &WalkerState, b: &WalkerState) -> f64 {
    a.amplitudes()
        .iter()
        .zip(b.amplitudes())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

fn verify_boundary(config: &ExperimentConfig, boundary: Boundary, checks: &mut Vec<Check>) -> Result<(), CliError> {
    let spec = GasketSpec::new(config.generation, boundary);
    let walk = QuantumWalk::new(spec);
    let graph = walk.graph();
    let mut push = |name, value: f64, tolerance| {
        checks.push(Check {
            name,
            boundary,
            value,
            tolerance,
        })
    };

    push("vertex_count", (graph.len() as f64 - spec.vertex_count() as f64).abs(), 0.0);
    let wraps = if boundary == Boundary::Periodic { 3 } else { 0 };
    let edges = 3usize.pow(config.generation + 1) + wraps;
    push("edge_count", (graph.edge_count() as f64 - edges as f64).abs(), 0.0);
    let shift = walk.shift();
    let broken = port_slots(graph).filter(|&s| shift.forward(shift.forward(s)) != s).count();
    push("shift_involution", broken as f64, 0.0);

    let initial = walk.initial_state(start_vertex(config, spec))?;
    let mut state = initial.clone();
    for _ in 0..config.steps.unwrap_or(1) {
        walk.step(&mut state)?;
    }
    push("norm_drift", (state.norm_sqr() - 1.0).abs(), NORM_TOLERANCE);

    if !config.dense_oracle {
        return Ok(());
    }
    let dense = build_dense_unitary(graph, config.dense_cap)?;
    push("unitarity", dense.unitarity_defect(), UNITARITY_TOLERANCE);

    let mut sparse = initial.clone();
    let mut reference = initial.clone();
    let mut worst: f64 = 0.0;
    for _ in 0..ORACLE_STEPS {
        walk.step(&mut sparse)?;
        reference = dense.apply(&reference);
        worst = worst.max(max_amplitude_error(&sparse, &reference));
    }
    push("sparse_vs_dense", worst, ORACLE_TOLERANCE);

    let decomp = SpectralDecomposition::new(&walk, config.dense_cap)?;
    let exact = exact_time_average(&decomp, &initial, AVERAGE_HORIZON)?;
    let mut acc = TimeAverage::new(graph);
    let mut state = initial;
    acc.push(&probability(graph, &state)?)?;
    for _ in 1..AVERAGE_HORIZON {
        walk.step(&mut state)?;
        acc.push(&probability(graph, &state)?)?;
    }
    let iterative = acc.average()?;
    let gap = iterative
        .values()
        .iter()
        .zip(exact.values())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    push("time_average_vs_spectral", gap, AVERAGE_TOLERANCE);
    Ok(())
}

fn verify(config: &ExperimentConfig, out: &mut Outputs) -> Result<(), CliError> {
    let boundaries = match config.boundary {
        Some(b) => vec![b],
        None => vec![Boundary::Periodic, Boundary::Reflective],
    };
    let mut checks = Vec::new();
    for b in boundaries {
        verify_boundary(config, b, &mut checks)?;
    }
    out.write("verify.csv", |w| {
        writeln!(w, "check,boundary,value,tolerance,pass")?;
        for c in &checks {
            writeln!(w, "{},{},{:e},{:e},{}", c.name, c.boundary, c.value, c.tolerance, c.passed())?;
        }
        Ok(())
    })?;
    for c in &checks {
        eprintln!(
            "{:<26} {:<10} {:>12.3e} <= {:<8.0e} {}",
            c.name,
            c.boundary,
            c.value,
            c.tolerance,
            if c.passed() { "PASS" } else { "FAIL" }
        );
    }
    out.outcome.failures = checks
        .iter()
        .filter(|c| !c.passed())
        .map(|c| format!("{}/{}", c.name, c.boundary))
        .collect();
    Ok(())
}
