//! Flip-flop shift and Grover coin.
//!
//! Amplitudes live in a flat array with [`DIRECTIONS`] slots per vertex; slots
//! that are not valid ports stay pinned to zero. The shift is a product of
//! disjoint transpositions over slots, one per undirected edge.

use std::io::{self, Write};
use std::ops::{Add, AddAssign, Mul, Sub};

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{QwError, Result};
use crate::evolution::WalkerState;
use crate::gasket::{GasketGraph, DIRECTIONS};

/// Lattice displacements of the six coin labels.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DirectionTable;

impl DirectionTable {
    pub const DX: [i64; DIRECTIONS] = [2, 1, -1, -2, -1, 1];
    pub const DY: [i64; DIRECTIONS] = [0, 1, 1, 0, -1, -1];

    pub fn dx(k: usize) -> i64 {
        Self::DX[k]
    }

    pub fn dy(k: usize) -> i64 {
        Self::DY[k]
    }

    /// The label pointing back along the same edge, `(k + 3) mod 6`.
    pub const fn opposite(k: usize) -> usize {
        (k + 3) % DIRECTIONS
    }
}

/// Scalar type an amplitude array can hold. Real amplitudes suffice whenever
/// the initial state is real, since both operators are real.
pub trait Amplitude:
    Copy
    + Send
    + Sync
    + PartialEq
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<f64, Output = Self>
    + AddAssign
    + 'static
{
    const ZERO: Self;
    fn norm_sqr(self) -> f64;
}

impl Amplitude for f64 {
    const ZERO: Self = 0.0;

    #[inline]
    fn norm_sqr(self) -> f64 {
        self * self
    }
}

impl Amplitude for Complex64 {
    const ZERO: Self = Complex64::new(0.0, 0.0);

    #[inline]
    fn norm_sqr(self) -> f64 {
        Complex64::norm_sqr(&self)
    }
}

/// Involutive permutation of port slots encoding the flip-flop shift.
#[derive(Debug, Clone)]
pub struct ShiftPermutation {
    partner: Vec<u32>,
    pairs: Vec<(u32, u32)>,
    invalid: Vec<u32>,
    port_count: usize,
}

impl ShiftPermutation {
    /// Slot that the amplitude at `slot` moves to. Invalid slots are fixed.
    pub fn forward(&self, slot: usize) -> usize {
        self.partner[slot] as usize
    }

    /// Transposition pairs `(a, b)` with `a < b`, sorted by `a`.
    pub fn pairs(&self) -> &[(u32, u32)] {
        &self.pairs
    }

    pub fn port_count(&self) -> usize {
        self.port_count
    }

    pub fn slot_count(&self) -> usize {
        self.partner.len()
    }

    /// Debug dump of the transpositions as `x,y,k,nx,ny,k_arr` pairs.
    pub fn write_pairs_csv<W: Write>(&self, graph: &GasketGraph, mut out: W) -> io::Result<()> {
        writeln!(out, "x,y,k,nx,ny,k_arr")?;
        for &(a, b) in &self.pairs {
            let (u, k) = (a as usize / DIRECTIONS, a as usize % DIRECTIONS);
            let (w, j) = (b as usize / DIRECTIONS, b as usize % DIRECTIONS);
            let (u, w) = (graph.vertex(u), graph.vertex(w));
            writeln!(out, "{},{},{},{},{},{}", u.x, u.y, k, w.x, w.y, j)?;
        }
        Ok(())
    }

    pub(crate) fn check_invalid<A: Amplitude>(&self, amps: &[A]) -> Result<()> {
        for &s in &self.invalid {
            if amps[s as usize] != A::ZERO {
                return Err(QwError::InvalidPortAmplitude {
                    vertex: s as usize / DIRECTIONS,
                    direction: s as usize % DIRECTIONS,
                });
            }
        }
        Ok(())
    }

    #[inline]
    pub(crate) fn apply_unchecked<A: Amplitude>(&self, amps: &mut [A]) {
        self.apply_pairs(&self.pairs, amps);
    }

    /// Swap only the pairs whose lower slot lies in `slots`.
    #[inline]
    pub(crate) fn apply_slot_range<A: Amplitude>(&self, amps: &mut [A], slots: std::ops::Range<usize>) {
        let lo = self.pairs.partition_point(|&(a, _)| (a as usize) < slots.start);
        let hi = self.pairs.partition_point(|&(a, _)| (a as usize) < slots.end);
        self.apply_pairs(&self.pairs[lo..hi], amps);
    }

    #[inline]
    fn apply_pairs<A: Amplitude>(&self, pairs: &[(u32, u32)], amps: &mut [A]) {
        for &(a, b) in pairs {
            amps.swap(a as usize, b as usize);
        }
    }
}

pub fn build_shift(graph: &GasketGraph) -> ShiftPermutation {
    let slots = graph.len() * DIRECTIONS;
    let mut partner: Vec<u32> = (0..slots as u32).collect();
    let mut pairs = Vec::with_capacity(graph.edge_count());
    let mut invalid = Vec::new();
    for u in 0..graph.len() {
        for k in 0..DIRECTIONS {
            let slot = u * DIRECTIONS + k;
            match graph.neighbor(u, k) {
                Some(link) => {
                    let target = link.vertex * DIRECTIONS + link.arrival;
                    partner[slot] = target as u32;
                    if slot < target {
                        pairs.push((slot as u32, target as u32));
                    }
                }
                None => invalid.push(slot as u32),
            }
        }
    }
    ShiftPermutation {
        partner,
        pairs,
        invalid,
        port_count: graph.port_count(),
    }
}

/// Grover matrix `(2/d)J - I` for degree `d` in {2, 4}.
pub fn coin_matrix(degree: usize) -> Result<DMatrix<f64>> {
    if degree != 2 && degree != 4 {
        return Err(QwError::UnsupportedDegree(degree));
    }
    let off = 2.0 / degree as f64;
    Ok(DMatrix::from_fn(degree, degree, |i, j| if i == j { off - 1.0 } else { off }))
}

/// Block-diagonal Grover coin over the valid ports of each vertex.
#[derive(Debug, Clone)]
pub struct CoinOperator {
    masks: Vec<u8>,
}

impl CoinOperator {
    pub fn new(graph: &GasketGraph) -> Self {
        Self {
            masks: graph.direction_masks().to_vec(),
        }
    }

    pub fn degree(&self, vertex: usize) -> usize {
        self.masks[vertex].count_ones() as usize
    }

    /// The Grover block of `vertex`, acting on its valid ports in ascending label order.
    pub fn block(&self, vertex: usize) -> DMatrix<f64> {
        coin_matrix(self.degree(vertex)).expect("gasket degrees are 2 or 4")
    }

    /// Apply the coin to vertices `vertices` of a flat slot array.
    #[inline]
    pub(crate) fn apply_range<A: Amplitude>(
        &self,
        amps: &mut [A],
        vertices: std::ops::Range<usize>,
    ) -> Result<()> {
        let chunks = amps[vertices.start * DIRECTIONS..vertices.end * DIRECTIONS].chunks_exact_mut(DIRECTIONS);
        for (offset, (chunk, &mask)) in chunks.zip(&self.masks[vertices.clone()]).enumerate() {
            let mut sum = A::ZERO;
            let mut stray = None;
            for (k, &a) in chunk.iter().enumerate() {
                if mask & (1 << k) != 0 {
                    sum += a;
                } else if a != A::ZERO {
                    stray = Some(k);
                }
            }
            if let Some(direction) = stray {
                return Err(QwError::InvalidPortAmplitude {
                    vertex: vertices.start + offset,
                    direction,
                });
            }
            let scaled = sum * (2.0 / mask.count_ones() as f64);
            for (k, a) in chunk.iter_mut().enumerate() {
                if mask & (1 << k) != 0 {
                    *a = scaled - *a;
                }
            }
        }
        Ok(())
    }
}

pub fn apply_coin(coin: &CoinOperator, state: &mut WalkerState) -> Result<()> {
    let n = coin.masks.len();
    check_len(state, n)?;
    coin.apply_range(state.amplitudes_mut(), 0..n)
}

pub fn apply_shift(perm: &ShiftPermutation, state: &mut WalkerState) -> Result<()> {
    if state.amplitudes().len() != perm.slot_count() {
        return Err(QwError::GraphMismatch(format!(
            "state has {} slots, shift expects {}",
            state.amplitudes().len(),
            perm.slot_count()
        )));
    }
    perm.check_invalid(state.amplitudes())?;
    perm.apply_unchecked(state.amplitudes_mut());
    Ok(())
}

fn check_len(state: &WalkerState, vertices: usize) -> Result<()> {
    if state.amplitudes().len() != vertices * DIRECTIONS {
        return Err(QwError::GraphMismatch(format!(
            "state has {} slots, operator expects {}",
            state.amplitudes().len(),
            vertices * DIRECTIONS
        )));
    }
    Ok(())
}
