//! Solver library for time-fractional subdiffusion equations
//! `D^a_t u - u_xx = f` on `[0,l] x [0,T]` with `a` in (0,1).
//!
//! The fractional derivative is discretized with the L1 scheme on graded
//! temporal meshes `t_n = T (n/N)^r`, the Laplacian with exact second-order
//! input jets, and the solution is represented as a composite of cascaded
//! networks: a dense base stage plus multiscale correction stages whose
//! amplitude and scale factors are derived from the spectrum of the running
//! physics residual. A classical finite-difference solver over the same
//! discretization serves as an independent reference.

pub mod acceptance;
pub mod autodiff;
pub mod config;
pub mod fdm;
pub mod l1;
pub mod mesh;
pub mod model;
pub mod optim;
pub mod problems;
pub mod report;
pub mod runner;
pub mod special;
pub mod staging;
pub mod train;

use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error in {func}: {msg}")]
    Domain { func: &'static str, msg: String },

    #[error("series did not converge: |term| = {last_term:e} after {terms} terms")]
    NonConvergence { last_term: f64, terms: usize },

    #[error("invalid parameter {name}: {msg}")]
    InvalidParameter { name: &'static str, msg: String },

    #[error("history length {got} does not match expected {expected}")]
    LengthMismatch { got: usize, expected: usize },

    #[error("singular tridiagonal system at time level {level} (pivot {pivot:e})")]
    SingularSystem { level: usize, pivot: f64 },

    #[error("exact solution vanishes on the evaluation lattice; relative norm undefined")]
    ZeroDenominator,

    #[error("empty input to {0}")]
    EmptyInput(&'static str),

    #[error("problem has no analytic second derivative of the initial condition")]
    MissingInitialCurvature,

    #[error("all {0} trials diverged to non-finite loss")]
    AllTrialsDiverged(usize),

    #[error("non-finite loss encountered at iteration {0}")]
    NonFiniteLoss(usize),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
