//! Walker state and time stepping with `U = S (G ⊗ I)`.

use std::fmt::Display;
use std::io::{Read, Write};

use num_complex::Complex64;

use crate::coinshift::{build_shift, Amplitude, CoinOperator, ShiftPermutation};
use crate::error::{QwError, Result};
use crate::gasket::{build_gasket, Boundary, GasketGraph, GasketSpec, Vertex, DIRECTIONS};

/// Complex amplitudes over `DIRECTIONS` slots per vertex, plus the step counter.
#[derive(Debug, Clone, PartialEq)]
pub struct WalkerState {
    spec: GasketSpec,
    amplitudes: Vec<Complex64>,
    time: u64,
}

impl WalkerState {
    pub fn zeros(graph: &GasketGraph) -> Self {
        Self {
            spec: graph.spec(),
            amplitudes: vec![Complex64::new(0.0, 0.0); graph.len() * DIRECTIONS],
            time: 0,
        }
    }

    pub fn spec(&self) -> GasketSpec {
        self.spec
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn amplitudes_mut(&mut self) -> &mut [Complex64] {
        &mut self.amplitudes
    }

    pub fn amplitude(&self, vertex: usize, direction: usize) -> Complex64 {
        self.amplitudes[vertex * DIRECTIONS + direction]
    }

    pub fn time(&self) -> u64 {
        self.time
    }

    pub fn set_time(&mut self, time: u64) {
        self.time = time;
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    /// Amplitudes of the valid ports only, in graph order.
    pub fn port_amplitudes(&self, graph: &GasketGraph) -> Vec<Complex64> {
        port_slots(graph).map(|s| self.amplitudes[s]).collect()
    }

    fn check_graph(&self, graph: &GasketGraph) -> Result<()> {
        if self.spec != graph.spec() || self.amplitudes.len() != graph.len() * DIRECTIONS {
            return Err(QwError::GraphMismatch(format!(
                "state for g={} {} used with graph g={} {}",
                self.spec.generation,
                self.spec.boundary,
                graph.generation(),
                graph.boundary()
            )));
        }
        Ok(())
    }
}

/// Slot indices of valid ports, in graph order.
pub fn port_slots(graph: &GasketGraph) -> impl Iterator<Item = usize> + '_ {
    (0..graph.len()).flat_map(move |v| {
        let mask = graph.direction_mask(v);
        (0..DIRECTIONS)
            .filter(move |k| mask & (1 << k) != 0)
            .map(move |k| v * DIRECTIONS + k)
    })
}

/// Uniform coin state `1/sqrt(d)` over the valid ports of `v0`.
pub fn initial_state(graph: &GasketGraph, v0: Vertex) -> Result<WalkerState> {
    let index = graph.require(v0)?;
    let mut state = WalkerState::zeros(graph);
    fill_uniform(graph, index, &mut state.amplitudes, Complex64::new(1.0, 0.0));
    Ok(state)
}

pub(crate) fn fill_uniform<A: Amplitude>(graph: &GasketGraph, index: usize, amps: &mut [A], one: A) {
    let mask = graph.direction_mask(index);
    let value = one * (1.0 / (mask.count_ones() as f64).sqrt());
    for k in 0..DIRECTIONS {
        if mask & (1 << k) != 0 {
            amps[index * DIRECTIONS + k] = value;
        }
    }
}

/// Graph together with its shift and coin operators.
#[derive(Debug, Clone)]
pub struct QuantumWalk {
    graph: GasketGraph,
    shift: ShiftPermutation,
    coin: CoinOperator,
}

impl QuantumWalk {
    pub fn new(spec: GasketSpec) -> Self {
        Self::from_graph(build_gasket(spec))
    }

    pub fn from_graph(graph: GasketGraph) -> Self {
        let shift = build_shift(&graph);
        let coin = CoinOperator::new(&graph);
        Self { graph, shift, coin }
    }

    pub fn graph(&self) -> &GasketGraph {
        &self.graph
    }

    pub fn shift(&self) -> &ShiftPermutation {
        &self.shift
    }

    pub fn coin(&self) -> &CoinOperator {
        &self.coin
    }

    pub fn initial_state(&self, v0: Vertex) -> Result<WalkerState> {
        initial_state(&self.graph, v0)
    }

    /// One application of `U`: coin, then shift.
    pub fn step(&self, state: &mut WalkerState) -> Result<()> {
        state.check_graph(&self.graph)?;
        self.step_slots(&mut state.amplitudes)?;
        state.time += 1;
        Ok(())
    }

    /// One application of `U^{-1} = C S`.
    pub fn step_back(&self, state: &mut WalkerState) -> Result<()> {
        state.check_graph(&self.graph)?;
        self.shift.check_invalid(&state.amplitudes)?;
        self.shift.apply_unchecked(&mut state.amplitudes);
        self.coin.apply_range(&mut state.amplitudes, 0..self.graph.len())?;
        state.time = state.time.saturating_sub(1);
        Ok(())
    }

    /// Apply `step` exactly `steps` times, calling `observer` after each.
    pub fn evolve<F, E>(&self, state: &mut WalkerState, steps: u64, mut observer: F) -> Result<()>
    where
        F: FnMut(&WalkerState) -> std::result::Result<(), E>,
        E: Display,
    {
        for _ in 0..steps {
            self.step(state)?;
            observer(state).map_err(|e| QwError::Observer {
                step: state.time,
                message: e.to_string(),
            })?;
        }
        Ok(())
    }

    #[inline]
    pub(crate) fn step_slots<A: Amplitude>(&self, amps: &mut [A]) -> Result<()> {
        self.coin.apply_range(amps, 0..self.graph.len())?;
        self.shift.apply_unchecked(amps);
        Ok(())
    }

    /// Step restricted to the vertices in `vertices`; every slot outside the
    /// range must be zero and stay zero, i.e. the range must cover the support
    /// plus one row on each side.
    #[inline]
    pub(crate) fn step_window<A: Amplitude>(&self, amps: &mut [A], vertices: std::ops::Range<usize>) -> Result<()> {
        self.coin.apply_range(amps, vertices.clone())?;
        self.shift
            .apply_slot_range(amps, vertices.start * DIRECTIONS..vertices.end * DIRECTIONS);
        Ok(())
    }
}

pub fn step(walk: &QuantumWalk, state: &mut WalkerState) -> Result<()> {
    walk.step(state)
}

pub fn evolve<F, E>(walk: &QuantumWalk, state: &mut WalkerState, steps: u64, observer: F) -> Result<()>
where
    F: FnMut(&WalkerState) -> std::result::Result<(), E>,
    E: Display,
{
    walk.evolve(state, steps, observer)
}

/// Write a checkpoint: `g: u32`, `boundary: u32` (0 periodic, 1 reflective),
/// `time: u64`, `port count: u64`, then `(re, im)` as `f64` per valid port;
/// all little-endian.
pub fn write_checkpoint<W: Write>(graph: &GasketGraph, state: &WalkerState, mut out: W) -> Result<()> {
    state.check_graph(graph)?;
    let io = |e: std::io::Error| QwError::Checkpoint(e.to_string());
    let boundary: u32 = match graph.boundary() {
        Boundary::Periodic => 0,
        Boundary::Reflective => 1,
    };
    let ports = state.port_amplitudes(graph);
    out.write_all(&graph.generation().to_le_bytes()).map_err(io)?;
    out.write_all(&boundary.to_le_bytes()).map_err(io)?;
    out.write_all(&state.time.to_le_bytes()).map_err(io)?;
    out.write_all(&(ports.len() as u64).to_le_bytes()).map_err(io)?;
    for a in ports {
        out.write_all(&a.re.to_le_bytes()).map_err(io)?;
        out.write_all(&a.im.to_le_bytes()).map_err(io)?;
    }
    Ok(())
}

pub fn read_checkpoint<R: Read>(graph: &GasketGraph, mut input: R) -> Result<WalkerState> {
    let io = |e: std::io::Error| QwError::Checkpoint(e.to_string());
    let mut b4 = [0u8; 4];
    let mut b8 = [0u8; 8];
    input.read_exact(&mut b4).map_err(io)?;
    let generation = u32::from_le_bytes(b4);
    input.read_exact(&mut b4).map_err(io)?;
    let boundary = match u32::from_le_bytes(b4) {
        0 => Boundary::Periodic,
        1 => Boundary::Reflective,
        other => return Err(QwError::Checkpoint(format!("unknown boundary code {other}"))),
    };
    if GasketSpec::new(generation, boundary) != graph.spec() {
        return Err(QwError::GraphMismatch(format!(
            "checkpoint is for g={generation} {boundary}, graph is g={} {}",
            graph.generation(),
            graph.boundary()
        )));
    }
    input.read_exact(&mut b8).map_err(io)?;
    let time = u64::from_le_bytes(b8);
    input.read_exact(&mut b8).map_err(io)?;
    let ports = u64::from_le_bytes(b8) as usize;
    if ports != graph.port_count() {
        return Err(QwError::Checkpoint(format!(
            "port count {ports} does not match graph ({})",
            graph.port_count()
        )));
    }
    let mut state = WalkerState::zeros(graph);
    state.time = time;
    let slots: Vec<usize> = port_slots(graph).collect();
    for s in slots {
        input.read_exact(&mut b8).map_err(io)?;
        let re = f64::from_le_bytes(b8);
        input.read_exact(&mut b8).map_err(io)?;
        let im = f64::from_le_bytes(b8);
        state.amplitudes[s] = Complex64::new(re, im);
    }
    Ok(state)
}
