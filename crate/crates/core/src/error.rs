use thiserror::Error;

/// Errors produced by the bound-construction pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("scenario too large: {vertices} deterministic vertices exceeds the 10^7 guard")]
    ScenarioTooLarge { vertices: u128 },

    #[error("linear program infeasible (phase-1 residual {residual:.3e})")]
    Infeasible { residual: f64 },

    #[error("linear program did not converge: {0}")]
    LpNonConvergence(String),

    #[error("no sign change of the bound on [{lo}, {hi}] (f(lo)={flo:.3e}, f(hi)={fhi:.3e})")]
    NoSignChange { lo: f64, hi: f64, flo: f64, fhi: f64 },

    #[error("limit coefficient estimate unstable (relative spread {spread:.3e})")]
    UnstableCoefficient { spread: f64 },

    #[error("schema violation: {0}")]
    SchemaViolation(String),

    #[error("postselection discards all mass")]
    DegeneratePostselection,

    #[error("inconsistent decomposition: {0}")]
    InconsistentDecomposition(String),
}

pub type Result<T> = std::result::Result<T, Error>;
