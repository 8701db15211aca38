//! Dense evolution operator, its eigendecomposition, limiting distributions
//! and exact time averages.
//!
//! `U = S C` is a real orthogonal matrix, so it is diagonalised through the
//! symmetric part `H = (U + U^T)/2` (eigenvalues `cos θ`) followed by the
//! antisymmetric part `A = (U - U^T)/2` restricted to each eigenspace of `H`,
//! where it acts as `i sin θ`. Both stages are Hermitian eigenproblems.

use std::f64::consts::PI;
use std::io::{self, Write};

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::coinshift::coin_matrix;
use crate::error::{QwError, Result};
use crate::evolution::{port_slots, QuantumWalk, WalkerState};
use crate::gasket::{GasketGraph, DIRECTIONS};
use crate::observables::{ProbabilityField, TimeAverage};

/// Default cap on the number of ports for dense construction.
pub const DEFAULT_DENSE_CAP: usize = 8192;

/// Two eigenvalues are treated as equal when `|λ - μ| <= EIGEN_TOLERANCE`.
pub const EIGEN_TOLERANCE: f64 = 1e-9;

/// Default horizon for the empirical limiting distribution.
pub const DEFAULT_EMPIRICAL_HORIZON: u64 = 100_000;

/// Dense `U` over the valid ports, in graph order.
#[derive(Debug, Clone)]
pub struct DenseUnitary {
    graph: GasketGraph,
    slots: Vec<usize>,
    matrix: DMatrix<f64>,
}

/// Build `U = S · (G ⊗ I)` densely, refusing if the port count exceeds `cap`.
pub fn build_dense_unitary(graph: &GasketGraph, cap: usize) -> Result<DenseUnitary> {
    let ports = graph.port_count();
    if ports > cap {
        return Err(QwError::DimensionCap { ports, cap });
    }
    let slots: Vec<usize> = port_slots(graph).collect();
    let mut port_of = vec![usize::MAX; graph.len() * DIRECTIONS];
    for (p, &s) in slots.iter().enumerate() {
        port_of[s] = p;
    }

    // Block-diagonal coin.
    let mut coin = DMatrix::<f64>::zeros(ports, ports);
    let mut p = 0;
    for v in 0..graph.len() {
        let d = graph.degree(v);
        let block = coin_matrix(d)?;
        coin.view_mut((p, p), (d, d)).copy_from(&block);
        p += d;
    }

    // Shift as a permutation matrix, read directly off the neighbor table.
    let mut shift = DMatrix::<f64>::zeros(ports, ports);
    for (q, &s) in slots.iter().enumerate() {
        let link = graph
            .neighbor(s / DIRECTIONS, s % DIRECTIONS)
            .expect("valid port has a neighbor");
        shift[(port_of[link.vertex * DIRECTIONS + link.arrival], q)] = 1.0;
    }

    Ok(DenseUnitary {
        graph: graph.clone(),
        slots,
        matrix: shift * coin,
    })
}

impl DenseUnitary {
    pub fn dim(&self) -> usize {
        self.slots.len()
    }

    pub fn graph(&self) -> &GasketGraph {
        &self.graph
    }

    /// The real matrix of `U`.
    pub fn real(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn complex(&self) -> DMatrix<Complex64> {
        self.matrix.map(|x| Complex64::new(x, 0.0))
    }

    /// `max |U^† U - I|`.
    pub fn unitarity_defect(&self) -> f64 {
        let n = self.dim();
        (self.matrix.transpose() * &self.matrix - DMatrix::<f64>::identity(n, n)).amax()
    }

    pub fn to_ports(&self, state: &WalkerState) -> DVector<Complex64> {
        DVector::from_iterator(self.dim(), self.slots.iter().map(|&s| state.amplitudes()[s]))
    }

    pub fn from_ports(&self, v: &DVector<Complex64>, time: u64) -> WalkerState {
        let mut st = WalkerState::zeros(&self.graph);
        for (&s, a) in self.slots.iter().zip(v.iter()) {
            st.amplitudes_mut()[s] = *a;
        }
        st.set_time(time);
        st
    }

    /// `U ψ` computed by dense matrix-vector product.
    pub fn apply(&self, state: &WalkerState) -> WalkerState {
        let psi = self.to_ports(state);
        let re = &self.matrix * psi.map(|a| a.re);
        let im = &self.matrix * psi.map(|a| a.im);
        let out = DVector::from_iterator(self.dim(), re.iter().zip(im.iter()).map(|(&r, &i)| Complex64::new(r, i)));
        self.from_ports(&out, state.time() + 1)
    }
}

/// A group of eigenvectors sharing one eigenvalue.
#[derive(Debug, Clone)]
pub struct Eigenspace {
    pub value: Complex64,
    /// Orthonormal columns spanning the eigenspace (port basis).
    pub basis: DMatrix<Complex64>,
}

impl Eigenspace {
    pub fn multiplicity(&self) -> usize {
        self.basis.ncols()
    }

    /// `P_λ ψ`.
    pub fn project(&self, psi: &DVector<Complex64>) -> DVector<Complex64> {
        &self.basis * (self.basis.adjoint() * psi)
    }

    pub fn projector(&self) -> DMatrix<Complex64> {
        &self.basis * self.basis.adjoint()
    }
}

#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    dense: DenseUnitary,
    spaces: Vec<Eigenspace>,
    tolerance: f64,
}

impl SpectralDecomposition {
    pub fn new(walk: &QuantumWalk, cap: usize) -> Result<Self> {
        Self::with_tolerance(walk.graph(), cap, EIGEN_TOLERANCE)
    }

    pub fn with_tolerance(graph: &GasketGraph, cap: usize, tolerance: f64) -> Result<Self> {
        let dense = build_dense_unitary(graph, cap)?;
        let spaces = eigenspaces(dense.real(), tolerance);
        Ok(Self {
            dense,
            spaces,
            tolerance,
        })
    }

    pub fn dense(&self) -> &DenseUnitary {
        &self.dense
    }

    pub fn eigenspaces(&self) -> &[Eigenspace] {
        &self.spaces
    }

    pub fn tolerance(&self) -> f64 {
        self.tolerance
    }

    /// All eigenvalues with multiplicity.
    pub fn eigenvalues(&self) -> Vec<Complex64> {
        self.spaces
            .iter()
            .flat_map(|s| std::iter::repeat(s.value).take(s.multiplicity()))
            .collect()
    }

    /// `Σ_λ λ P_λ`.
    pub fn reconstruct(&self) -> DMatrix<Complex64> {
        let n = self.dense.dim();
        let mut m = DMatrix::<Complex64>::zeros(n, n);
        for s in &self.spaces {
            m += s.projector() * s.value;
        }
        m
    }

    /// `re,im,multiplicity` per distinct eigenvalue, ordered by phase.
    pub fn write_eigenvalues_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "re,im,multiplicity")?;
        for s in &self.spaces {
            writeln!(out, "{},{},{}", s.value.re, s.value.im, s.multiplicity())?;
        }
        Ok(())
    }

    fn projections(&self, initial: &WalkerState) -> Result<Vec<DVector<Complex64>>> {
        if initial.spec() != self.dense.graph.spec() {
            return Err(QwError::GraphMismatch("initial state does not match decomposition".into()));
        }
        let psi = self.dense.to_ports(initial);
        Ok(self.spaces.iter().map(|s| s.project(&psi)).collect())
    }

    fn field_from_ports(&self, per_port: &[f64], time: u64) -> Result<ProbabilityField> {
        let graph = &self.dense.graph;
        let mut values = vec![0.0; graph.len()];
        for (&s, p) in self.dense.slots.iter().zip(per_port) {
            values[s / DIRECTIONS] += p;
        }
        // Exact zeros can come out as -1e-18 after cancellation.
        for v in &mut values {
            *v = v.max(0.0);
        }
        ProbabilityField::from_values(graph, values, time)
    }
}

/// Group eigenpairs of the real orthogonal matrix `u` by eigenvalue.
fn eigenspaces(u: &DMatrix<f64>, tolerance: f64) -> Vec<Eigenspace> {
    let n = u.nrows();
    let ut = u.transpose();
    let sym = (u + &ut) * 0.5;
    let anti = (u - &ut) * 0.5;

    let eig = SymmetricEigen::new(sym);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));

    let mut pairs: Vec<(Complex64, DVector<Complex64>)> = Vec::with_capacity(n);
    for cluster in chain_clusters(&order, |i| eig.eigenvalues[i], tolerance) {
        let basis = DMatrix::from_fn(n, cluster.len(), |r, c| eig.eigenvectors[(r, cluster[c])]);
        // `A` acts on this cosine eigenspace as `i sin θ`; M = -i VᵀAV is Hermitian with eigenvalues sin θ.
        let k = basis.transpose() * &anti * &basis;
        let b = basis.transpose() * u * &basis;
        let m = k.map(|x| Complex64::new(0.0, -x));
        let inner = SymmetricEigen::new(m);
        let basis_c = basis.map(|x| Complex64::new(x, 0.0));
        let b_c = b.map(|x| Complex64::new(x, 0.0));
        for j in 0..cluster.len() {
            let z = inner.eigenvectors.column(j).into_owned();
            let lambda = (z.adjoint() * &b_c * &z)[(0, 0)];
            let lambda = lambda / lambda.norm();
            pairs.push((lambda, &basis_c * z));
        }
    }

    pairs.sort_by(|a, b| a.0.arg().total_cmp(&b.0.arg()));
    let idx: Vec<usize> = (0..pairs.len()).collect();
    let mut groups = chain_clusters_complex(&idx, |i| pairs[i].0, tolerance);
    // Phases wrap at ±π: merge the last group into the first when they touch.
    if groups.len() > 1 {
        let first = pairs[groups[0][0]].0;
        let last = pairs[*groups.last().unwrap().last().unwrap()].0;
        if (first - last).norm() <= tolerance {
            let tail = groups.pop().unwrap();
            groups[0].splice(0..0, tail);
        }
    }

    groups
        .into_iter()
        .map(|g| {
            let mut sum = Complex64::new(0.0, 0.0);
            for &i in &g {
                sum += pairs[i].0;
            }
            let value = sum / sum.norm();
            let basis = DMatrix::from_fn(n, g.len(), |r, c| pairs[g[c]].1[r]);
            Eigenspace { value, basis }
        })
        .collect()
}

fn chain_clusters(order: &[usize], key: impl Fn(usize) -> f64, tol: f64) -> Vec<Vec<usize>> {
    let mut out: Vec<Vec<usize>> = Vec::new();
    for &i in order {
        match out.last_mut() {
            Some(c) if (key(i) - key(*c.last().unwrap())).abs() <= tol => c.push(i),
            _ => out.push(vec![i]),
        }
    }
    out
}

fn chain_clusters_complex(order: &[usize], key: impl Fn(usize) -> Complex64, tol: f64) -> Vec<Vec<usize>> {
    let mut out: Vec<Vec<usize>> = Vec::new();
    for &i in order {
        match out.last_mut() {
            Some(c) if (key(i) - key(*c.last().unwrap())).norm() <= tol => c.push(i),
            _ => out.push(vec![i]),
        }
    }
    out
}

/// Cesàro limit `π(v) = Σ_k Σ_λ |⟨v,k| P_λ |ψ(0)⟩|²`.
pub fn limiting_distribution(decomp: &SpectralDecomposition, initial: &WalkerState) -> Result<ProbabilityField> {
    let proj = decomp.projections(initial)?;
    let n = decomp.dense.dim();
    let mut per_port = vec![0.0; n];
    for a in &proj {
        for (p, x) in per_port.iter_mut().zip(a.iter()) {
            *p += x.norm_sqr();
        }
    }
    decomp.field_from_ports(&per_port, 0)
}

/// `p̄(T)` from the eigendecomposition: pairs within one eigenspace contribute
/// a constant, distinct pairs the geometric mean `(1/T) Σ_{t<T} (λ μ̄)^t`.
pub fn exact_time_average(decomp: &SpectralDecomposition, initial: &WalkerState, horizon: u64) -> Result<ProbabilityField> {
    if horizon == 0 {
        return Err(QwError::InvalidArgument("time average over T = 0 steps".into()));
    }
    let proj = decomp.projections(initial)?;
    let spaces = decomp.eigenspaces();
    let g = spaces.len();
    let t = horizon as f64;

    let phases: Vec<f64> = spaces.iter().map(|s| s.value.arg()).collect();
    let mut weight = DMatrix::<Complex64>::zeros(g, g);
    for a in 0..g {
        for b in 0..g {
            weight[(a, b)] = if a == b {
                Complex64::new(1.0, 0.0)
            } else {
                geometric_mean_phase(phases[a] - phases[b], t)
            };
        }
    }

    let n = decomp.dense.dim();
    let mut per_port = vec![0.0; n];
    let mut column = DVector::<Complex64>::zeros(g);
    for (p, out) in per_port.iter_mut().enumerate() {
        for (a, v) in proj.iter().enumerate() {
            column[a] = v[p];
        }
        // Re(aᵀ W ā)
        let wa = &weight * column.map(|x| x.conj());
        *out = column.iter().zip(wa.iter()).map(|(x, y)| (x * y).re).sum::<f64>();
    }
    decomp.field_from_ports(&per_port, horizon)
}

/// `(1/T) Σ_{t<T} e^{iφt}` in the cancellation-free form
/// `e^{i(T-1)φ/2} sin(Tφ/2) / (T sin(φ/2))`.
fn geometric_mean_phase(phi: f64, t: f64) -> Complex64 {
    let phi = phi.rem_euclid(2.0 * PI);
    let half = 0.5 * phi;
    let ratio = (t * half).sin() / (t * half.sin());
    Complex64::from_polar(ratio, (t - 1.0) * half)
}

/// Where a limiting distribution came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase", tag = "kind")]
pub enum LimitSource {
    Spectral,
    Empirical { horizon: u64 },
}

impl std::fmt::Display for LimitSource {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            LimitSource::Spectral => f.write_str("spectral"),
            LimitSource::Empirical { horizon } => write!(f, "empirical(T={horizon})"),
        }
    }
}

/// `p̄(horizon)` by direct iteration; stands in for `π` above the dense cap.
pub fn empirical_limiting_distribution(walk: &QuantumWalk, initial: &WalkerState, horizon: u64) -> Result<ProbabilityField> {
    if horizon == 0 {
        return Err(QwError::InvalidArgument("empirical horizon must be >= 1".into()));
    }
    let mut acc = TimeAverage::new(walk.graph());
    let mut state = initial.clone();
    acc.push_amplitudes(state.amplitudes());
    for _ in 1..horizon {
        walk.step(&mut state)?;
        acc.push_amplitudes(state.amplitudes());
    }
    acc.average()
}

/// Spectral `π` when the port count fits under `cap`, otherwise empirical.
pub fn limiting(walk: &QuantumWalk, initial: &WalkerState, cap: usize, horizon: u64) -> Result<(ProbabilityField, LimitSource)> {
    if walk.graph().port_count() <= cap {
        let decomp = SpectralDecomposition::new(walk, cap)?;
        Ok((limiting_distribution(&decomp, initial)?, LimitSource::Spectral))
    } else {
        Ok((
            empirical_limiting_distribution(walk, initial, horizon)?,
            LimitSource::Empirical { horizon },
        ))
    }
}
