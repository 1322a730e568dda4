use thiserror::Error;

/// Errors raised by the model primitives, the solvers and the simulator.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("labor {n} outside [0, 1)")]
    LaborOutOfRange { n: f64 },

    #[error("revenue {revenue} exceeds the Laffer peak {max} at productivity {kappa}")]
    InfeasibleRevenue { revenue: f64, max: f64, kappa: f64 },

    #[error("negative revenue {0} requires lump-sum taxes")]
    NegativeRevenue(f64),

    #[error("multiplier is singular at the Laffer peak (n = {n})")]
    MultiplierSingular { n: f64 },

    #[error("{what} did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence {
        what: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error(
        "price loop did not converge after {iterations} outer iterations (last residual {last:e})"
    )]
    PriceLoop {
        iterations: usize,
        last: f64,
        history: Vec<f64>,
    },

    #[error("spending level {g} outside the shock grid [{lo}, {hi}]")]
    OutsideGrid { g: f64, lo: f64, hi: f64 },

    #[error("incompatible inputs: {0}")]
    Incompatible(String),

    #[error("i/o: {0}")]
    Io(String),

    #[error("solution bundle: {0}")]
    Bundle(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
