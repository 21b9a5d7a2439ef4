//! Coarse-grained and effective dynamics for overdamped and underdamped
//! Langevin systems.
//!
//! The crate simulates a full system, its exact coarse-grained closure and
//! the time-independent effective approximation, computes the functional
//! inequality constants that enter the relative-entropy and Wasserstein-2
//! error bounds, and verifies those bounds numerically on a catalog of
//! scale-separated potentials.
//!
//! Start with the runnable programs in `examples/`; each one exercises a
//! major capability end to end. The `effdyn` binary wraps the same pipelines
//! behind a small batch CLI.

// Stencil and flux-assembly loops index several arrays by the same cell
// counter; rewriting them as iterator chains hides the neighbour structure.
#![allow(clippy::needless_range_loop)]

pub mod bench;
pub mod closure;
pub mod fpgrid;
pub mod funcineq;
pub mod gaussref;
pub mod integrators;
pub mod linalg;
pub mod metrics;
pub mod model;
pub mod ratefn;
pub mod rng;
pub mod sampling;

use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("degenerate coarse-graining map: reciprocal condition number {rcond:.3e} below {threshold:.1e}")]
    DegenerateMap { rcond: f64, threshold: f64 },

    #[error("truncation level must exceed 1, got {0}")]
    BadTruncationLevel(f64),

    #[error("chain tuning failed: acceptance rate {rate:.3} outside [0.1, 0.9] after adaptation")]
    ChainTuning { rate: f64 },

    #[error("insufficient fiber occupancy: {got} points survive the bin filter, need at least {need}")]
    InsufficientOccupancy { got: usize, need: usize },

    #[error("trajectory blow-up at t = {t:.6}: |state| exceeded {limit:.1e}")]
    BlowUp { t: f64, limit: f64 },

    #[error("query point {point:?} lies outside the coefficient grid")]
    Extrapolation { point: Vec<f64> },

    #[error("empty coefficient cell encountered at {point:?}; no occupied neighbours to interpolate")]
    EmptyCell { point: Vec<f64> },

    #[error("time step {dt:.3e} violates the stability bound {max_dt:.3e}")]
    CflViolation { dt: f64, max_dt: f64 },

    #[error("solver box too small: boundary mass fraction {leak:.3e} exceeds {threshold:.1e}")]
    BoxTooSmall { leak: f64, threshold: f64 },

    #[error("grid mismatch between the two densities")]
    GridMismatch,

    #[error("matrix is not positive semi-definite (min eigenvalue {min_eig:.3e})")]
    NotPsd { min_eig: f64 },

    #[error("bound report incomplete: missing constant {0}")]
    IncompleteReport(&'static str),

    #[error("Wasserstein mode unavailable for this input shape: {0}")]
    WassersteinShape(&'static str),

    #[error("phase-space map requires an affine base map")]
    NonAffinePhaseMap,

    #[error("linear system appears non-dissipative: second moments diverge")]
    Divergent,

    #[error("Bakry-Emery not applicable: fiber Hessian not positive (min eigenvalue {min_eig:.3e})")]
    NonConvexFiber { min_eig: f64 },

    #[error("config error at {path}: {message}")]
    Config { path: String, message: String },

    #[error("validation failed: {0}")]
    Validation(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("expression error: {0}")]
    Expr(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
