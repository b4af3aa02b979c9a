use serde::Serialize;
use thiserror::Error;

use crate::model::ValidationReport;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    Validation(ValidationReport),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("matrix is not Hermitian (max |H - H^dagger| = {deviation:e})")]
    NotHermitian { deviation: f64 },

    #[error("basis label {0} is not part of this subspace")]
    LabelNotInBasis(String),

    #[error("Fock basis has {size} states, above the cap of {cap}")]
    BasisTooLarge { size: usize, cap: usize },

    #[error("quadrature did not converge: estimated error {estimate:e} exceeds {tolerance:e}")]
    Quadrature { estimate: f64, tolerance: f64 },

    #[error("eigen-solver did not converge after {sweeps} sweeps")]
    Eigen { sweeps: usize },

    #[error("fit failed: {0}")]
    Fit(String),
}

impl Error {
    /// Short machine-readable tag used in structured error output.
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Validation(_) | Error::InvalidInput(_) | Error::LabelNotInBasis(_) => {
                ErrorKind::Config
            }
            _ => ErrorKind::Numeric,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorKind {
    Config,
    Numeric,
}

pub type Result<T> = std::result::Result<T, Error>;
