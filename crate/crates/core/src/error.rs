use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An input lies on or outside the boundary of its (open) domain.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },

    /// `E[θ^-k]` does not exist for the requested order.
    #[error("negative moment of order {k} diverges: {reason}")]
    DivergentMoment { k: f64, reason: String },

    #[error("moment {0} was not computed")]
    MissingMoment(&'static str),

    #[error("numerical error: {0}")]
    Numerical(String),

    /// A truncated integration range still carries non-negligible density.
    #[error("integrand not decayed at cutoff {edge}: relative density {ratio:e}")]
    Divergence { edge: f64, ratio: f64 },

    #[error("{mass:e} of the posterior mass lies in the outermost grid cells")]
    EdgeMass { mass: f64 },

    #[error("minimum lies at the bracket edge of ({lo}, {hi})")]
    Bracket { lo: f64, hi: f64 },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("{aborted} of {attempted} replications aborted (limit 0.1%): {last}")]
    TooManyAborts {
        aborted: usize,
        attempted: usize,
        last: String,
    },
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn numerical(msg: impl Into<String>) -> Self {
        Error::Numerical(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}
