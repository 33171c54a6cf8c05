use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("nodes `{0}` and `{1}` are co-located")]
    CoLocated(String, String),

    #[error("matrix is not Hermitian (asymmetry {0:.3e})")]
    NotHermitian(f64),

    #[error("expansion point is infeasible: {0}")]
    InfeasibleExpansion(String),

    #[error("start point violates constraint {index} by {violation:.3e}")]
    InfeasibleStart { index: usize, violation: f64 },

    #[error("non-finite oracle output at iteration {iter}: {what}")]
    NonFinite { iter: usize, what: String },

    #[error("constraint set is empty: {0}")]
    EmptyConstraintSet(String),

    #[error("could not reach a feasible initial point: {0}")]
    Initialization(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("channel file parse error at line {line}: {reason}")]
    ChannelParse { line: usize, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter { name, reason: reason.into() }
    }
}
