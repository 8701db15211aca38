//! Power-law fits, all-vertex exponent sweeps, mixing times and the
//! classical random-walk comparator.

use std::io::{self, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{FitError, QwError, Result};
use crate::evolution::{fill_uniform, QuantumWalk, WalkerState};
use crate::gasket::{Boundary, GasketGraph, Vertex, DIRECTIONS};
use crate::observables::{stddev_of_slots, stddev_of_values, StdDevSample, TimeAverage};
use crate::spectral::LimitSource;

/// Minimum number of points inside a diffusion-exponent fit window.
pub const MIN_FIT_POINTS: usize = 5;

/// Number of histogram bins over the observed `d_w` range.
pub const HISTOGRAM_BINS: usize = 40;

/// Default epsilon grid for mixing times.
pub const DEFAULT_EPSILONS: [f64; 4] = [0.1, 0.05, 0.02, 0.01];

/// `value ≈ prefactor · t^exponent` fitted by least squares in log-log space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerLawFit {
    pub prefactor: f64,
    pub exponent: f64,
    pub t_min: f64,
    pub t_max: f64,
    /// RMS residual of `ln(value)` about the fitted line.
    pub residual: f64,
    pub points: usize,
}

impl PowerLawFit {
    /// `1 / exponent`, the walk dimension when the series is `σ(t)`.
    pub fn walk_dimension(&self) -> f64 {
        1.0 / self.exponent
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.prefactor * t.powf(self.exponent)
    }
}

/// Fit `value = a t^b` to the points with `t` in `[window.0, window.1]`.
pub fn fit_power_law(series: &[(f64, f64)], window: (f64, f64)) -> Result<PowerLawFit, FitError> {
    fit_log_log(series, window, MIN_FIT_POINTS)
}

fn fit_log_log(series: &[(f64, f64)], window: (f64, f64), min_points: usize) -> Result<PowerLawFit, FitError> {
    let (t_min, t_max) = window;
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (index, &(t, value)) in series.iter().enumerate() {
        if t < t_min || t > t_max {
            continue;
        }
        if !(t > 0.0 && value > 0.0) || !value.is_finite() {
            return Err(FitError::NonPositive { index, t, value });
        }
        xs.push(t.ln());
        ys.push(value.ln());
    }
    if xs.len() < min_points {
        return Err(FitError::TooFewPoints {
            t_min,
            t_max,
            found: xs.len(),
            need: min_points,
        });
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(FitError::Degenerate(mx.exp()));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residual = (xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum::<f64>()
        / n)
        .sqrt();
    Ok(PowerLawFit {
        prefactor: intercept.exp(),
        exponent: slope,
        t_min,
        t_max,
        residual,
        points: xs.len(),
    })
}

/// Default number of steps for displacement runs: 128 at g = 8, `2^{g-1}` in general.
pub fn default_steps(generation: u32) -> u64 {
    1u64 << generation.saturating_sub(1)
}

/// Default fit window `[4, steps]`.
pub fn default_window(steps: u64) -> (f64, f64) {
    (4.0, steps as f64)
}

/// `σ(t)` for `t = 0..=steps` from the uniform coin state at `start`.
///
/// Uses real amplitudes and only touches the rows the walker can have
/// reached, so it requires reflective boundaries.
pub fn sigma_series(walk: &QuantumWalk, start: Vertex, steps: u64) -> Result<Vec<StdDevSample>> {
    let graph = walk.graph();
    let index = graph.require(start)?;
    if graph.boundary() != Boundary::Reflective {
        return sigma_series_full(walk, start, steps);
    }
    let vertices = graph.vertices();
    let mut amps = vec![0.0f64; graph.len() * DIRECTIONS];
    fill_uniform(graph, index, &mut amps, 1.0);
    let y0 = start.y;
    let mut out = Vec::with_capacity(steps as usize + 1);
    out.push(stddev_of_slots(&amps, vertices, graph.rows(y0, y0), 0));
    for t in 1..=steps {
        let reach = t as i64 + 1;
        let range = graph.rows(y0 - reach, y0 + reach);
        walk.step_window(&mut amps, range.clone())?;
        out.push(stddev_of_slots(&amps, vertices, range, t));
    }
    Ok(out)
}

/// Same as [`sigma_series`] but sweeping every vertex each step (any boundary).
pub fn sigma_series_full(walk: &QuantumWalk, start: Vertex, steps: u64) -> Result<Vec<StdDevSample>> {
    let graph = walk.graph();
    let index = graph.require(start)?;
    let mut amps = vec![0.0f64; graph.len() * DIRECTIONS];
    fill_uniform(graph, index, &mut amps, 1.0);
    let all = 0..graph.len();
    let mut out = Vec::with_capacity(steps as usize + 1);
    out.push(stddev_of_slots(&amps, graph.vertices(), all.clone(), 0));
    for t in 1..=steps {
        walk.step_slots(&mut amps)?;
        out.push(stddev_of_slots(&amps, graph.vertices(), all.clone(), t));
    }
    Ok(out)
}

pub fn sigma_points(samples: &[StdDevSample]) -> Vec<(f64, f64)> {
    samples.iter().map(|s| (s.t as f64, s.sigma)).collect()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VertexExponent {
    pub vertex: Vertex,
    pub fit: PowerLawFit,
}

/// Histogram of fitted walk dimensions `d_w = 1/exponent`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExponentHistogram {
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
    pub walk_dimensions: Vec<f64>,
}

impl ExponentHistogram {
    pub fn from_walk_dimensions(walk_dimensions: Vec<f64>, bins: usize) -> Self {
        let lo = walk_dimensions.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = walk_dimensions.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let (lo, hi) = if walk_dimensions.is_empty() {
            (0.0, 1.0)
        } else if hi > lo {
            (lo, hi)
        } else {
            (lo - 0.5, hi + 0.5)
        };
        let width = (hi - lo) / bins as f64;
        let edges: Vec<f64> = (0..=bins).map(|i| if i == bins { hi } else { lo + width * i as f64 }).collect();
        let mut counts = vec![0; bins];
        for &d in &walk_dimensions {
            let b = (((d - lo) / width) as usize).min(bins - 1);
            counts[b] += 1;
        }
        Self {
            edges,
            counts,
            walk_dimensions,
        }
    }

    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "bin_lo,bin_hi,count")?;
        for (i, c) in self.counts.iter().enumerate() {
            writeln!(out, "{},{},{}", self.edges[i], self.edges[i + 1], c)?;
        }
        Ok(())
    }
}

/// Everything produced by an all-vertex sweep.
#[derive(Debug, Clone)]
pub struct ExponentSweep {
    pub steps: u64,
    pub window: (f64, f64),
    pub per_vertex: Vec<VertexExponent>,
    pub histogram: ExponentHistogram,
    /// `σ̄(t) = (1/N) Σ_v σ_v(t)` for `t = 0..=steps`.
    pub mean_series: Vec<(u64, f64)>,
    pub mean_fit: PowerLawFit,
    pub mean_of_exponents: f64,
}

impl ExponentSweep {
    pub fn write_per_vertex_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "x,y,a,exponent,residual")?;
        for v in &self.per_vertex {
            writeln!(
                out,
                "{},{},{},{},{}",
                v.vertex.x, v.vertex.y, v.fit.prefactor, v.fit.exponent, v.fit.residual
            )?;
        }
        Ok(())
    }

    pub fn write_mean_series_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "t,sigma_bar")?;
        for (t, s) in &self.mean_series {
            writeln!(out, "{t},{s}")?;
        }
        Ok(())
    }
}

/// Evolve from every vertex, fit `σ(t)` per start, and fit the mean series.
///
/// Runs on the current rayon pool; results are merged in vertex order so the
/// output does not depend on the number of workers.
pub fn sweep_exponents(walk: &QuantumWalk, steps: u64, window: (f64, f64)) -> Result<ExponentSweep> {
    let graph = walk.graph();
    check_displacement_run(graph, steps)?;
    let runs: Vec<Result<(Vec<f64>, PowerLawFit)>> = graph
        .vertices()
        .par_iter()
        .map(|&v| {
            let series = sigma_series(walk, v, steps)?;
            let fit = fit_power_law(&sigma_points(&series), window)?;
            Ok((series.into_iter().map(|s| s.sigma).collect(), fit))
        })
        .collect();

    let n = graph.len();
    let mut sums = vec![0.0; steps as usize + 1];
    let mut per_vertex = Vec::with_capacity(n);
    for (v, run) in graph.vertices().iter().zip(runs) {
        let (sigmas, fit) = run?;
        for (s, x) in sums.iter_mut().zip(&sigmas) {
            *s += x;
        }
        per_vertex.push(VertexExponent { vertex: *v, fit });
    }
    let mean_series: Vec<(u64, f64)> = sums.iter().enumerate().map(|(t, s)| (t as u64, s / n as f64)).collect();
    let points: Vec<(f64, f64)> = mean_series.iter().map(|&(t, s)| (t as f64, s)).collect();
    let mean_fit = fit_power_law(&points, window)?;
    let mean_of_exponents = per_vertex.iter().map(|v| v.fit.exponent).sum::<f64>() / n as f64;
    let histogram = ExponentHistogram::from_walk_dimensions(
        per_vertex.iter().map(|v| v.fit.walk_dimension()).collect(),
        HISTOGRAM_BINS,
    );
    Ok(ExponentSweep {
        steps,
        window,
        per_vertex,
        histogram,
        mean_series,
        mean_fit,
        mean_of_exponents,
    })
}

/// Displacement runs need reflective corners and must stop before the walker
/// can cross the gasket (`steps <= 2^g`).
pub fn check_displacement_run(graph: &GasketGraph, steps: u64) -> Result<()> {
    if graph.boundary() != Boundary::Reflective {
        return Err(QwError::InvalidArgument(
            "displacement sweeps require reflective boundary conditions".into(),
        ));
    }
    let cutoff = 1u64 << graph.generation();
    if steps > cutoff {
        return Err(QwError::InvalidArgument(format!(
            "{steps} steps exceeds the pre-saturation cutoff 2^g = {cutoff}"
        )));
    }
    Ok(())
}

/// `T ↦ ||p̄(T) - π||` for `T = 1..=horizon`.
pub fn tvd_series(walk: &QuantumWalk, initial: &WalkerState, limit: &[f64], horizon: u64) -> Result<Vec<(u64, f64)>> {
    if limit.len() != walk.graph().len() {
        return Err(QwError::GraphMismatch("limiting distribution length".into()));
    }
    let mut acc = TimeAverage::new(walk.graph());
    let mut state = initial.clone();
    let mut out = Vec::with_capacity(horizon as usize);
    acc.push_amplitudes(state.amplitudes());
    out.push((1, acc.tvd_to(limit)));
    for t in 2..=horizon {
        walk.step(&mut state)?;
        acc.push_amplitudes(state.amplitudes());
        out.push((t, acc.tvd_to(limit)));
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MixingMethod {
    Scan,
    FitExtrapolated,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixingResult {
    pub epsilon: f64,
    /// `None` when the distance has not settled below epsilon within the horizon.
    pub tau: Option<u64>,
    pub horizon: u64,
    pub method: MixingMethod,
    pub source: LimitSource,
}

/// Smallest computed `T` such that every computed `t >= T` has distance `<= epsilon`.
pub fn scan_mixing_time(series: &[(u64, f64)], epsilon: f64) -> Option<u64> {
    if epsilon >= 1.0 {
        return Some(0);
    }
    match series.iter().rposition(|&(_, d)| d > epsilon) {
        None => series.first().map(|&(t, _)| t),
        Some(i) if i + 1 < series.len() => Some(series[i + 1].0),
        Some(_) => None,
    }
}

/// Mixing times for each epsilon, by scanning the distance series against
/// `limit` up to `horizon`.
pub fn mixing_time(
    walk: &QuantumWalk,
    initial: &WalkerState,
    limit: &[f64],
    source: LimitSource,
    epsilons: &[f64],
    horizon: u64,
) -> Result<Vec<MixingResult>> {
    for &e in epsilons {
        if !(e > 0.0) {
            return Err(QwError::InvalidArgument(format!("epsilon {e} must be positive")));
        }
    }
    let series = tvd_series(walk, initial, limit, horizon)?;
    Ok(epsilons
        .iter()
        .map(|&epsilon| MixingResult {
            epsilon,
            tau: scan_mixing_time(&series, epsilon),
            horizon,
            method: MixingMethod::Scan,
            source,
        })
        .collect())
}

/// Mixing time predicted by the fitted envelope `a T^b` of a distance series:
/// the smallest integer `T` with `a T^b <= epsilon`.
pub fn extrapolated_mixing_time(fit: &PowerLawFit, epsilon: f64, horizon: u64, source: LimitSource) -> MixingResult {
    let tau = if epsilon >= 1.0 {
        Some(0)
    } else if fit.exponent < 0.0 {
        Some((epsilon / fit.prefactor).powf(1.0 / fit.exponent).ceil().max(1.0) as u64)
    } else {
        None
    };
    MixingResult {
        epsilon,
        tau,
        horizon,
        method: MixingMethod::FitExtrapolated,
        source,
    }
}

/// Power-law fit of `τ_ε` against the vertex count `N`.
pub fn mixing_scaling(results: &[(usize, u64)]) -> Result<PowerLawFit, FitError> {
    let mut seen: Vec<usize> = results.iter().map(|r| r.0).collect();
    seen.sort_unstable();
    if let Some(w) = seen.windows(2).find(|w| w[0] == w[1]) {
        return Err(FitError::Duplicate(w[0] as f64));
    }
    let points: Vec<(f64, f64)> = results.iter().map(|&(n, tau)| (n as f64, tau as f64)).collect();
    fit_log_log(&points, (f64::NEG_INFINITY, f64::INFINITY), 3)
}

/// Classical random walk `p_{t+1}(v) = Σ_{u~v} p_t(u)/deg(u)`; returns `σ(t)` for `t = 0..=steps`.
pub fn classical_walk_series(graph: &GasketGraph, start: Vertex, steps: u64) -> Result<Vec<StdDevSample>> {
    let index = graph.require(start)?;
    let mut p = vec![0.0; graph.len()];
    p[index] = 1.0;
    let mut next = vec![0.0; graph.len()];
    let mut out = Vec::with_capacity(steps as usize + 1);
    out.push(stddev_of_values(&p, graph.vertices(), 0));
    for t in 1..=steps {
        next.iter_mut().for_each(|x| *x = 0.0);
        for (u, &pu) in p.iter().enumerate() {
            if pu == 0.0 {
                continue;
            }
            let share = pu / graph.degree(u) as f64;
            for k in 0..DIRECTIONS {
                if let Some(link) = graph.neighbor(u, k) {
                    next[link.vertex] += share;
                }
            }
        }
        std::mem::swap(&mut p, &mut next);
        out.push(stddev_of_values(&p, graph.vertices(), t));
    }
    Ok(out)
}

/// Probability vector of the classical walk after `steps` steps.
pub fn classical_walk_distribution(graph: &GasketGraph, start: Vertex, steps: u64) -> Result<Vec<f64>> {
    let index = graph.require(start)?;
    let mut p = vec![0.0; graph.len()];
    p[index] = 1.0;
    for _ in 0..steps {
        let mut next = vec![0.0; graph.len()];
        for (u, &pu) in p.iter().enumerate() {
            let share = pu / graph.degree(u) as f64;
            for k in 0..DIRECTIONS {
                if let Some(link) = graph.neighbor(u, k) {
                    next[link.vertex] += share;
                }
            }
        }
        p = next;
    }
    Ok(p)
}

pub fn write_tvd_csv<W: Write>(series: &[(u64, f64)], mut out: W) -> io::Result<()> {
    writeln!(out, "t,tvd")?;
    for (t, d) in series {
        writeln!(out, "{t},{d}")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gasket::GasketSpec;

    fn synthetic(a: f64, b: f64, ts: impl Iterator<Item = u64>) -> Vec<(f64, f64)> {
        ts.map(|t| (t as f64, a * (t as f64).powf(b))).collect()
    }

    #[test]
    fn exact_power_law_is_recovered() {
        let s = synthetic(1.3, 0.44, 1..=128);
        let fit = fit_power_law(&s, (4.0, 128.0)).unwrap();
        assert!((fit.prefactor - 1.3).abs() < 1e-10);
        assert!((fit.exponent - 0.44).abs() < 1e-10);
        assert!(fit.residual < 1e-12);
        assert_eq!(fit.points, 125);
    }

    #[test]
    fn constant_series_has_zero_exponent() {
        let s: Vec<_> = (1..=20).map(|t| (t as f64, 3.0)).collect();
        let fit = fit_power_law(&s, (1.0, 20.0)).unwrap();
        assert!(fit.exponent.abs() < 1e-14);
        assert!((fit.prefactor - 3.0).abs() < 1e-12);
    }

    #[test]
    fn fit_errors() {
        let s = synthetic(1.0, 0.5, 1..=10);
        assert!(matches!(
            fit_power_law(&s, (8.0, 10.0)),
            Err(FitError::TooFewPoints { found: 3, need: 5, .. })
        ));
        let mut bad = s.clone();
        bad[5].1 = 0.0;
        assert_eq!(
            fit_power_law(&bad, (1.0, 10.0)),
            Err(FitError::NonPositive { index: 5, t: 6.0, value: 0.0 })
        );
        let same: Vec<_> = (0..6).map(|_| (2.0, 1.0)).collect();
        assert!(matches!(fit_power_law(&same, (1.0, 3.0)), Err(FitError::Degenerate(_))));
    }

    #[test]
    fn mixing_scan_convention() {
        let series: Vec<(u64, f64)> = (1..=1000).map(|t| (t, 2.0 / t as f64)).collect();
        assert_eq!(scan_mixing_time(&series, 0.01), Some(200));
        assert_eq!(scan_mixing_time(&series, 1.0), Some(0));
        assert_eq!(scan_mixing_time(&series, 0.001), None);
        let flat: Vec<(u64, f64)> = (1..=5).map(|t| (t, 0.0)).collect();
        assert_eq!(scan_mixing_time(&flat, 0.5), Some(1));
    }

    #[test]
    fn mixing_scaling_examples() {
        let pts: Vec<(usize, u64)> = Vec::new();
        assert!(mixing_scaling(&pts).is_err());
        let fit = fit_log_log(
            &[123.0, 366.0, 1095.0, 3282.0]
                .iter()
                .map(|&n: &f64| (n, 0.034 * n.powf(0.54)))
                .collect::<Vec<_>>(),
            (0.0, f64::INFINITY),
            3,
        )
        .unwrap();
        assert!((fit.exponent - 0.54).abs() < 1e-10);
        assert_eq!(mixing_scaling(&[(15, 3), (15, 4)]), Err(FitError::Duplicate(15.0)));
        assert!(matches!(
            mixing_scaling(&[(15, 3), (42, 4)]),
            Err(FitError::TooFewPoints { .. })
        ));
    }

    #[test]
    fn extrapolated_mixing() {
        let fit = PowerLawFit {
            prefactor: 2.0,
            exponent: -1.0,
            t_min: 1.0,
            t_max: 100.0,
            residual: 0.0,
            points: 100,
        };
        assert_eq!(extrapolated_mixing_time(&fit, 0.01, 100, LimitSource::Spectral).tau, Some(200));
    }

    #[test]
    fn classical_one_step_and_mass() {
        let g = crate::gasket::build_gasket(GasketSpec::new(2, Boundary::Reflective));
        let p = classical_walk_distribution(&g, Vertex::new(4, 0), 1).unwrap();
        for v in [(2, 0), (6, 0), (3, 1), (5, 1)] {
            assert_eq!(p[g.index_of(Vertex::new(v.0, v.1)).unwrap()], 0.25);
        }
        for t in 0..30 {
            let p = classical_walk_distribution(&g, Vertex::new(4, 0), t).unwrap();
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-13);
        }
    }

    #[test]
    fn histogram_counts_everything() {
        let h = ExponentHistogram::from_walk_dimensions(vec![2.0, 2.1, 2.5, 3.0, 3.0], HISTOGRAM_BINS);
        assert_eq!(h.total(), 5);
        assert_eq!(h.counts[HISTOGRAM_BINS - 1], 2);
        let single = ExponentHistogram::from_walk_dimensions(vec![2.0], 4);
        assert_eq!(single.total(), 1);
    }

    #[test]
    fn windowed_sigma_matches_full_sweep() {
        let walk = QuantumWalk::new(GasketSpec::new(4, Boundary::Reflective));
        for v in [Vertex::new(16, 0), Vertex::new(9, 7), Vertex::new(16, 16), Vertex::new(0, 0)] {
            let a = sigma_series(&walk, v, 16).unwrap();
            let b = sigma_series_full(&walk, v, 16).unwrap();
            assert_eq!(a, b, "{v}");
        }
    }

    #[test]
    fn sweep_requires_reflective_and_cutoff() {
        let walk = QuantumWalk::new(GasketSpec::new(2, Boundary::Periodic));
        assert!(sweep_exponents(&walk, 4, (1.0, 4.0)).is_err());
        let walk = QuantumWalk::new(GasketSpec::new(2, Boundary::Reflective));
        assert!(sweep_exponents(&walk, 5, (1.0, 5.0)).is_err());
    }
}
