//! Numerical laboratory for non-recurrence of the 2D incompressible Euler
//! flow on the annulus `M = { 1 ≤ |x| ≤ 2 }`.
//!
//! The centerpiece is a vorticity-transport solver whose velocity is
//! reconstructed each step from the three-part decomposition
//! `v = v̂ + ṽ + ∇φ`: a circulation-carrying rotation, a free-space
//! Biot–Savart volume integral, and a harmonic correction obtained by
//! solving a single-layer-potential moment equation on the two boundary
//! circles. On top of the solver sit a material-line tracker that measures
//! the winding separation of a line's endpoints, and an experiment driver
//! that checks the non-recurrence verdicts against their analytic bounds.
//!
//! Three self-contained companion modules cover the finite-measure side of
//! the story: exact Poincaré recurrence for permutation systems
//! ([`measure_recurrence`]), the pendulum dichotomy between libration and
//! unbounded drift ([`pendulum`]), and dyadic-shell Besov/Sobolev norms on
//! the torus ([`besov`]).

pub mod besov;
pub mod biot_savart;
pub mod boundary_integral;
pub mod cli;
pub mod euler_sim;
pub mod geometry;
pub mod io;
pub mod lagrangian;
pub mod measure_recurrence;
pub mod pendulum;
pub mod recurrence_lab;

use thiserror::Error;

/// Unified error type for every fallible operation in the crate.
#[derive(Debug, Error)]
pub enum Error {
    /// A parameter violates a documented precondition (grid too coarse,
    /// odd angular count, nonpositive step, ...).
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// An evaluation point lies outside the closed annulus.
    #[error("point ({x:.6}, {y:.6}) lies outside the annulus 1 ≤ |x| ≤ 2")]
    PointOutsideAnnulus { x: f64, y: f64 },

    /// A field value is NaN or infinite.
    #[error("non-finite field value at node {index}")]
    NonFiniteField { index: usize },

    /// Two fields that must share a grid do not.
    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    /// The moment equation's least-squares residual exceeds tolerance,
    /// signalling Neumann data that violates the solvability condition.
    #[error("moment equation unsolvable: residual {residual:.3e} exceeds {tolerance:.3e}")]
    Unsolvable { residual: f64, tolerance: f64 },

    /// The configured time step breaks the advection stability bound.
    #[error("CFL violation: {0}")]
    CflViolation(String),

    /// The simulation lost finiteness; the message carries diagnostics.
    #[error("solution became non-finite at t = {t}: {details}")]
    NonFiniteState { t: f64, details: String },

    /// A Lagrangian marker left the annulus beyond tolerance.
    #[error("marker {index} escaped the annulus: |x| = {radius:.9}")]
    MarkerEscape { index: usize, radius: f64 },

    /// Line refinement exceeded the configured marker cap.
    #[error("material line refinement exceeded the cap of {cap} markers")]
    RefinementExplosion { cap: usize },

    /// A bump-construction constraint failed on the grid.
    #[error("bump constraint violated: {0}")]
    ConstraintViolation(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    /// A CSV input file does not match its declared schema.
    #[error("csv parse error: {0}")]
    CsvParse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
