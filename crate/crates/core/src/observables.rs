//! Born-rule probability fields and the quantities derived from them.

use std::collections::BTreeMap;
use std::io::{self, Write};
use std::sync::Arc;

use crate::coinshift::Amplitude;
use crate::error::{QwError, Result};
use crate::evolution::WalkerState;
use crate::gasket::{GasketGraph, GasketSpec, Vertex, DIRECTIONS};

/// Probability per vertex, in graph order.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityField {
    spec: GasketSpec,
    vertices: Arc<[Vertex]>,
    values: Vec<f64>,
    time: u64,
}

impl ProbabilityField {
    /// Wrap per-vertex values. Fails if the length does not match the graph
    /// or any value is negative or non-finite.
    pub fn from_values(graph: &GasketGraph, values: Vec<f64>, time: u64) -> Result<Self> {
        if values.len() != graph.len() {
            return Err(QwError::GraphMismatch(format!(
                "{} values for {} vertices",
                values.len(),
                graph.len()
            )));
        }
        if let Some((i, v)) = values.iter().enumerate().find(|(_, v)| !(**v >= 0.0) || !v.is_finite()) {
            return Err(QwError::InvalidArgument(format!("probability {v} at vertex {i}")));
        }
        Ok(Self {
            spec: graph.spec(),
            vertices: graph.shared_vertices(),
            values,
            time,
        })
    }

    pub fn point_mass(graph: &GasketGraph, v: Vertex) -> Result<Self> {
        let i = graph.require(v)?;
        let mut values = vec![0.0; graph.len()];
        values[i] = 1.0;
        Self::from_values(graph, values, 0)
    }

    pub fn spec(&self) -> GasketSpec {
        self.spec
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn vertices(&self) -> &[Vertex] {
        &self.vertices
    }

    /// Step index (or averaging horizon) the field was taken at.
    pub fn time(&self) -> u64 {
        self.time
    }

    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn get(&self, v: Vertex) -> Option<f64> {
        self.vertices.binary_search_by_key(&(v.y, v.x), |w| (w.y, w.x)).ok().map(|i| self.values[i])
    }

    fn check_same(&self, other: &Self) -> Result<()> {
        if self.spec != other.spec || self.values.len() != other.values.len() {
            return Err(QwError::GraphMismatch(format!(
                "fields for g={} {} and g={} {}",
                self.spec.generation, self.spec.boundary, other.spec.generation, other.spec.boundary
            )));
        }
        Ok(())
    }

    /// `p(x) = sum_y p(x, y)`, ascending in `x`.
    pub fn x_marginal(&self) -> Vec<(i64, f64)> {
        self.marginal(|v| v.x)
    }

    /// `p(y) = sum_x p(x, y)`, ascending in `y`.
    pub fn y_marginal(&self) -> Vec<(i64, f64)> {
        self.marginal(|v| v.y)
    }

    fn marginal(&self, key: impl Fn(&Vertex) -> i64) -> Vec<(i64, f64)> {
        let mut m = BTreeMap::new();
        for (v, p) in self.vertices.iter().zip(&self.values) {
            *m.entry(key(v)).or_insert(0.0) += p;
        }
        m.into_iter().collect()
    }

    /// `x,y,p` rows sorted by `(y, x)`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "x,y,p")?;
        for (v, p) in self.vertices.iter().zip(&self.values) {
            writeln!(out, "{},{},{}", v.x, v.y, p)?;
        }
        Ok(())
    }

    pub fn write_x_marginal_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "x,p")?;
        for (x, p) in self.x_marginal() {
            writeln!(out, "{x},{p}")?;
        }
        Ok(())
    }
}

/// `p(v) = sum_k |psi_{k;v}|^2`.
pub fn probability(graph: &GasketGraph, state: &WalkerState) -> Result<ProbabilityField> {
    if state.spec() != graph.spec() {
        return Err(QwError::GraphMismatch("state and graph differ".into()));
    }
    let values = vertex_probabilities(state.amplitudes());
    ProbabilityField::from_values(graph, values, state.time())
}

pub(crate) fn vertex_probabilities<A: Amplitude>(amps: &[A]) -> Vec<f64> {
    amps.chunks_exact(DIRECTIONS)
        .map(|c| c.iter().map(|a| a.norm_sqr()).sum())
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StdDevSample {
    pub t: u64,
    pub sigma_x: f64,
    pub sigma_y: f64,
    pub sigma: f64,
}

impl StdDevSample {
    pub const CSV_HEADER: &'static str = "t,sigma_x,sigma_y,sigma";

    pub fn csv_row(&self) -> String {
        format!("{},{},{},{}", self.t, self.sigma_x, self.sigma_y, self.sigma)
    }
}

#[derive(Debug, Default, Clone, Copy)]
struct Moments {
    mass: f64,
    x: f64,
    xx: f64,
    y: f64,
    yy: f64,
}

impl Moments {
    #[inline]
    fn add(&mut self, v: Vertex, p: f64) {
        let (x, y) = (v.x as f64, v.y as f64);
        self.mass += p;
        self.x += x * p;
        self.xx += x * x * p;
        self.y += y * p;
        self.yy += y * y * p;
    }

    fn sample(&self, t: u64) -> StdDevSample {
        // Normalise by the accumulated mass so round-off in the norm does not bias sigma.
        let m = self.mass;
        let var_x = (self.xx / m - (self.x / m).powi(2)).max(0.0);
        let var_y = (self.yy / m - (self.y / m).powi(2)).max(0.0);
        StdDevSample {
            t,
            sigma_x: var_x.sqrt(),
            sigma_y: var_y.sqrt(),
            sigma: (var_x + var_y).sqrt(),
        }
    }
}

/// Position standard deviation `sigma^2 = sigma_x^2 + sigma_y^2` of the
/// marginals `p(x)` and `p(y)`.
pub fn stddev(field: &ProbabilityField) -> StdDevSample {
    let mut m = Moments::default();
    for (v, &p) in field.vertices.iter().zip(&field.values) {
        m.add(*v, p);
    }
    m.sample(field.time)
}

/// `stddev(probability(state))` restricted to vertices in `range`, without
/// materialising the field.
#[inline]
pub(crate) fn stddev_of_slots<A: Amplitude>(
    amps: &[A],
    vertices: &[Vertex],
    range: std::ops::Range<usize>,
    t: u64,
) -> StdDevSample {
    let mut m = Moments::default();
    for i in range {
        let p: f64 = amps[i * DIRECTIONS..(i + 1) * DIRECTIONS].iter().map(|a| a.norm_sqr()).sum();
        m.add(vertices[i], p);
    }
    m.sample(t)
}

pub(crate) fn stddev_of_values(values: &[f64], vertices: &[Vertex], t: u64) -> StdDevSample {
    let mut m = Moments::default();
    for (v, &p) in vertices.iter().zip(values) {
        m.add(*v, p);
    }
    m.sample(t)
}

/// Running sum of per-step fields; `average()` divides once at the end.
#[derive(Debug, Clone)]
pub struct TimeAverage {
    spec: GasketSpec,
    vertices: Arc<[Vertex]>,
    sum: Vec<f64>,
    count: u64,
}

impl TimeAverage {
    pub fn new(graph: &GasketGraph) -> Self {
        Self {
            spec: graph.spec(),
            vertices: graph.shared_vertices(),
            sum: vec![0.0; graph.len()],
            count: 0,
        }
    }

    pub fn push(&mut self, field: &ProbabilityField) -> Result<()> {
        if field.spec != self.spec || field.values.len() != self.sum.len() {
            return Err(QwError::GraphMismatch("field does not match accumulator".into()));
        }
        self.push_values(&field.values);
        Ok(())
    }

    pub(crate) fn push_values(&mut self, values: &[f64]) {
        for (s, p) in self.sum.iter_mut().zip(values) {
            *s += p;
        }
        self.count += 1;
    }

    pub(crate) fn push_amplitudes<A: Amplitude>(&mut self, amps: &[A]) {
        for (s, c) in self.sum.iter_mut().zip(amps.chunks_exact(DIRECTIONS)) {
            *s += c.iter().map(|a| a.norm_sqr()).sum::<f64>();
        }
        self.count += 1;
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    /// `p̄(T) = (1/T) sum_{t<T} p(t)` with `T = count()`.
    pub fn average(&self) -> Result<ProbabilityField> {
        if self.count == 0 {
            return Err(QwError::InvalidArgument("time average over T = 0 fields".into()));
        }
        let t = self.count as f64;
        Ok(ProbabilityField {
            spec: self.spec,
            vertices: Arc::clone(&self.vertices),
            values: self.sum.iter().map(|s| s / t).collect(),
            time: self.count,
        })
    }

    /// Total variation distance of the current average to `reference`
    /// without allocating the averaged field.
    pub(crate) fn tvd_to(&self, reference: &[f64]) -> f64 {
        let t = self.count as f64;
        0.5 * self.sum.iter().zip(reference).map(|(s, q)| (s / t - q).abs()).sum::<f64>()
    }
}

/// Push `field` into `acc` and return the average over everything pushed so far.
pub fn time_averaged(acc: &mut TimeAverage, field: &ProbabilityField) -> Result<ProbabilityField> {
    acc.push(field)?;
    acc.average()
}

/// `||p - q|| = 1/2 sum |p - q|`.
pub fn tvd(p: &ProbabilityField, q: &ProbabilityField) -> Result<f64> {
    p.check_same(q)?;
    Ok(tvd_values(&p.values, &q.values))
}

pub(crate) fn tvd_values(p: &[f64], q: &[f64]) -> f64 {
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

pub fn write_sigma_csv<W: Write>(samples: &[StdDevSample], mut out: W) -> io::Result<()> {
    writeln!(out, "{}", StdDevSample::CSV_HEADER)?;
    for s in samples {
        writeln!(out, "{}", s.csv_row())?;
    }
    Ok(())
}
