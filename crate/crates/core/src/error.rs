use thiserror::Error;

/// Errors produced by the spin-system laboratory.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),

    #[error("symbol {symbol} at position {position} is out of range for an alphabet of size {size}")]
    SymbolOutOfRange {
        position: usize,
        symbol: usize,
        size: usize,
    },

    #[error("configuration space has {states} states, above the cap of {cap}")]
    StateCapExceeded { states: u128, cap: usize },

    #[error("measures live on different configuration spaces")]
    SpaceMismatch,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("site is not a member of the site set")]
    SiteNotInSet,

    #[error("conditioning context has zero probability")]
    ZeroMassContext,

    #[error("relative entropy is infinite")]
    InfiniteDivergence,

    #[error("support violation: {0}")]
    SupportViolation(String),

    #[error("contexts must differ at exactly one site outside the block, found {0}")]
    ContextDifference(usize),

    /// The iterative solver hit its cap; the best iterate's disagreement
    /// vector is kept so callers can still inspect it.
    #[error("solver did not converge after {iterations} iterations (best value {best_value}, gap {gap})")]
    NotConverged {
        iterations: usize,
        best_value: f64,
        gap: f64,
        best_disagreement: Vec<f64>,
    },

    #[error("linear program infeasible: {0}")]
    Infeasible(String),

    #[error("not applicable: {0}")]
    NotApplicable(String),
}

pub type Result<T> = std::result::Result<T, Error>;
