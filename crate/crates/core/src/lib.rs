//! Discrete-time coined quantum walks on Sierpinski gaskets.
//!
//! The walk uses the Grover coin and the flip-flop shift on the gasket
//! embedded in the integer half-grid. Besides the sparse evolution the crate
//! provides dense and spectral oracles, diffusion-exponent fits, limiting
//! distributions and mixing times.

pub mod analysis;
pub mod cli;
pub mod coinshift;
pub mod error;
pub mod evolution;
pub mod gasket;
pub mod observables;
pub mod spectral;

pub use coinshift::{apply_coin, apply_shift, build_shift, coin_matrix, CoinOperator, DirectionTable, ShiftPermutation};
pub use error::{FitError, QwError, Result};
pub use evolution::{evolve, initial_state, step, QuantumWalk, WalkerState};
pub use gasket::{build_gasket, contains, Boundary, GasketGraph, GasketSpec, Vertex, DIRECTIONS};
pub use observables::{probability, stddev, time_averaged, tvd, ProbabilityField, StdDevSample, TimeAverage};
pub use analysis::{
    classical_walk_series, extrapolated_mixing_time, fit_power_law, mixing_scaling, mixing_time, scan_mixing_time,
    sigma_series, sweep_exponents, tvd_series, ExponentHistogram, ExponentSweep, MixingMethod, MixingResult,
    PowerLawFit,
};
pub use spectral::{
    build_dense_unitary, empirical_limiting_distribution, exact_time_average, limiting, limiting_distribution,
    DenseUnitary, Eigenspace, LimitSource, SpectralDecomposition,
};
