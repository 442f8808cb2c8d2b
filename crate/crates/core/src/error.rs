use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got} ({what})")]
    Dimension {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("matrix is not positive definite: {0}")]
    NotPositiveDefinite(&'static str),

    #[error("kernel matrix ill-conditioned even after jitter {jitter:e}")]
    IllConditioned { jitter: f64 },

    #[error("posterior variance {0:e} is negative beyond round-off tolerance")]
    NegativeVariance(f64),

    #[error("non-finite torque at control tick {tick}")]
    NonFiniteTorque { tick: usize },

    #[error("non-finite state at control tick {tick}")]
    NonFiniteState { tick: usize },

    #[error("non-finite robust bound rho")]
    NonFiniteRho,

    #[error("empty dataset")]
    EmptyDataset,

    #[error("csv: {0}")]
    Csv(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_dim(what: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::Dimension {
            what,
            expected,
            got,
        })
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Csv(e.to_string())
    }
}
