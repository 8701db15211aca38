use thiserror::Error;

use crate::gasket::Vertex;

/// Errors raised by the walk simulator and its analysis pipelines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum QwError {
    #[error("vertex ({}, {}) is not on the generation-{generation} gasket", .vertex.x, .vertex.y)]
    UnknownVertex { generation: u32, vertex: Vertex },

    #[error("nonzero amplitude on invalid port (vertex index {vertex}, direction {direction})")]
    InvalidPortAmplitude { vertex: usize, direction: usize },

    #[error("unsupported coin degree {0}; only 2 and 4 occur on the gasket")]
    UnsupportedDegree(usize),

    #[error("state/field belongs to a different graph ({0})")]
    GraphMismatch(String),

    #[error("dense operator with {ports} ports exceeds the dimension cap of {cap}")]
    DimensionCap { ports: usize, cap: usize },

    #[error("observer failed at step {step}: {message}")]
    Observer { step: u64, message: String },

    #[error("fit error: {0}")]
    Fit(#[from] FitError),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("checkpoint: {0}")]
    Checkpoint(String),
}

/// Failures of the log-log least-squares fit.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum FitError {
    #[error("fit window [{t_min}, {t_max}] contains {found} points, need at least {need}")]
    TooFewPoints {
        t_min: f64,
        t_max: f64,
        found: usize,
        need: usize,
    },

    #[error("nonpositive value at index {index} (t = {t}, value = {value})")]
    NonPositive { index: usize, t: f64, value: f64 },

    #[error("degenerate abscissae: all points share t = {0}")]
    Degenerate(f64),

    #[error("duplicate abscissa {0}")]
    Duplicate(f64),
}

pub type Result<T, E = QwError> = std::result::Result<T, E>;
