use thiserror::Error;

/// Errors raised by the numerical routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Domain(String),

    #[error("quadrature did not converge on [{lo}, {hi}]: error estimate {estimate:.3e}")]
    Quadrature { lo: f64, hi: f64, estimate: f64 },

    #[error("no sign change in bracket [{lo}, {hi}]")]
    Bracket { lo: f64, hi: f64 },

    #[error("root finder exceeded {0} iterations")]
    RootIterations(usize),

    #[error("fixed-point iteration is not contracting (ratio {ratio:.4}) at frequency {nu}")]
    NotContracting { nu: f64, ratio: f64 },

    #[error("fixed-point iteration hit the cap of {iterations} steps (last change {change:.3e})")]
    IterationCap { iterations: usize, change: f64 },

    #[error("eigensolver failed: {0}")]
    Eigen(String),

    #[error("linear solve failed: {0}")]
    Singular(String),

    #[error("eigenfunction has zero norm")]
    Normalization,

    #[error("truncation refused: {0}")]
    Truncation(String),
}

impl Error {
    /// Short label of the computation stage, used in CLI diagnostics.
    pub fn stage(&self) -> &'static str {
        match self {
            Error::Domain(_) => "parameters",
            Error::Quadrature { .. } => "quadrature",
            Error::Bracket { .. } | Error::RootIterations(_) => "frequency root",
            Error::NotContracting { .. } | Error::IterationCap { .. } => "auxiliary integral equations",
            Error::Eigen(_) => "eigensolver",
            Error::Singular(_) => "linear system",
            Error::Normalization => "eigenfunction assembly",
            Error::Truncation(_) => "truncation",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
