use thiserror::Error;

/// Errors raised anywhere in the simulation and solver stack.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("eta = {eta} is not a lattice point of spacing {delta} within [-{eta_max}, {eta_max}]")]
    OffLattice { eta: f64, delta: f64, eta_max: f64 },

    #[error("event cap of {cap} exceeded after simulated time {time}")]
    EventCapExceeded { cap: u64, time: f64 },

    #[error("grid with {nodes} nodes needs about {bytes} bytes, budget is {budget}")]
    MemoryBudget { nodes: usize, bytes: u64, budget: u64 },

    #[error("zero pivot at row {row} during factorization")]
    ZeroPivot { row: usize },

    #[error("residual {residual:e} above tolerance {tolerance:e}")]
    Residual { residual: f64, tolerance: f64 },

    #[error("solver did not converge: {0}")]
    NoConvergence(String),

    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },

    #[error("sample vectors have different lengths ({0} vs {1})")]
    LengthMismatch(usize, usize),

    #[error("mean of the denominator sample is zero")]
    ZeroDenominator,

    #[error("histogram bins near zero are empty")]
    EmptyBins,

    #[error("cell ({k}, {l}) cannot be extrapolated: {reason}")]
    NotExtrapolatable { k: i32, l: i32, reason: String },

    #[error("unresolvable dependency while filling cells {0:?}")]
    UnresolvedCells(Vec<(i32, i32)>),

    #[error("{0}")]
    Domain(String),
}

pub type Result<T> = std::result::Result<T, Error>;
