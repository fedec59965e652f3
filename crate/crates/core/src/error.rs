//! Crate-wide error type.
//!
//! Every fallible operation returns [`Result`]. Errors carry enough context
//! to tell a caller *which* contract was violated (group mismatch, chart not
//! admissible, cut locus, truncation escape, ...), since the suite surfaces
//! them verbatim in reports.

use crate::group::{ChartId, GroupId};

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("group mismatch: expected {expected:?}, got {got:?}")]
    GroupMismatch { expected: GroupId, got: GroupId },

    #[error("chart {chart:?} is not admissible for group {group:?}")]
    ChartNotAdmissible { group: GroupId, chart: ChartId },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("cut locus: log undefined at angle {angle} (limit {limit})")]
    CutLocus { angle: f64, limit: f64 },

    #[error("matrix logarithm did not converge (trace {trace})")]
    LogDiverged { trace: f64 },

    #[error("element invariant violated: {what} (residual {residual:.3e})")]
    InvariantViolated { what: &'static str, residual: f64 },

    #[error("singular chart point: {what}")]
    SingularChartPoint { what: &'static str },

    #[error("coordinate {axis} = {value} escapes the truncation box [{lo}, {hi}]")]
    OutsideTruncation { axis: usize, value: f64, lo: f64, hi: f64 },

    #[error("truncation unsafe: boundary mass fraction {fraction:.3e} exceeds {limit:.1e}")]
    MassLeakage { fraction: f64, limit: f64 },

    #[error("density is not normalizable (mass {mass})")]
    NotNormalizable { mass: f64 },

    #[error("negative density sample {value:.3e} at node {node}")]
    NegativeDensity { node: usize, value: f64 },

    #[error("grids do not match: {what}")]
    GridMismatch { what: &'static str },

    #[error("support violation: {mass:.3e} of f1-mass lies where f2 is below the floor")]
    SupportViolation { mass: f64 },

    #[error("bandwidth {requested} exceeds supported maximum {max}")]
    BandwidthExceeded { requested: usize, max: usize },

    #[error(
        "diffusion time {t} is below the truncation-safe minimum for bandwidth {bandwidth}; \
         need bandwidth >= {required}"
    )]
    TimeBelowTruncationSafe {
        t: f64,
        bandwidth: usize,
        required: usize,
    },

    #[error("decomposition not admissible: {what}")]
    DecompositionNotAdmissible { what: String },

    #[error("invalid Cayley table: {what}")]
    InvalidCayleyTable { what: String },

    #[error("matrix is not orthogonal within {tol:.1e} (residual {residual:.3e})")]
    NotOrthogonal { residual: f64, tol: f64 },

    #[error("config error: {0}")]
    Config(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
