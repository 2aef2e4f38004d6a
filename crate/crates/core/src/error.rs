use thiserror::Error;

/// Errors raised by the analysis routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid rational literal {0:?}")]
    ParseRational(String),

    #[error("invalid source: {}", format_violations(.0))]
    InvalidSource(Vec<crate::model::Violation>),

    #[error("empty batch")]
    EmptyBatch,

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("{n} coordinates exceed the exact enumeration cap of {cap}; use the Monte Carlo estimator (rid_linear_mc)")]
    EnumerationCap { n: usize, cap: usize },

    #[error("sensitivity defined for independent form")]
    DependentSensitivity,

    #[error("degenerate: purely discrete")]
    PurelyDiscrete,

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("zero matrix")]
    ZeroMatrix,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("no convergence after {0} iterations")]
    NoConvergence(usize),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

fn format_violations(v: &[crate::model::Violation]) -> String {
    v.iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
