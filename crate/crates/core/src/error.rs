use thiserror::Error;

/// Errors raised by the numerical routines of this crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("domain error: {0}")]
    Domain(String),

    /// A method could not reach its accuracy target. The best available
    /// estimate and an error bound for it are carried along.
    #[error("accuracy target not met in {context}: estimate {estimate:e}, error bound {bound:e}")]
    Accuracy {
        context: String,
        estimate: f64,
        bound: f64,
    },

    #[error("unsupported branch: {0}")]
    UnsupportedBranch(String),

    #[error("series diverges at t = {t}: term {term_index} has magnitude {magnitude:e}")]
    Divergence {
        t: f64,
        term_index: usize,
        magnitude: f64,
    },

    #[error("circulant embedding is not nonnegative definite: clipped mass fraction {clipped_fraction:e}")]
    Synthesis { clipped_fraction: f64 },

    #[error("domain too small: boundary density {boundary_density:e}, try a half width of at least {suggested_half_width}")]
    DomainTooSmall {
        boundary_density: f64,
        suggested_half_width: f64,
    },
}

impl Error {
    /// True for failures of a numerical method (as opposed to bad input).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Accuracy { .. } | Error::Divergence { .. } | Error::Synthesis { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn param_err(msg: impl Into<String>) -> Error {
    Error::Parameter(msg.into())
}

pub(crate) fn domain_err(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}
