use num_complex::Complex64;
use thiserror::Error;

use crate::device::BareState;

pub type Result<T> = std::result::Result<T, Error>;

/// Coarse classification used by the CLI to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    PhysicsDomain,
    Numerical,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid device parameters: {0}")]
    InvalidParams(String),

    #[error("Hilbert space dimension {dim} exceeds cap {cap}")]
    DimensionOverflow { dim: usize, cap: usize },

    #[error("static Hamiltonian is not Hermitian (max deviation {0:.3e})")]
    NonHermitian(f64),

    #[error("dressed state labeling is ambiguous at {state}: best overlap {overlap:.3}")]
    AmbiguousLabeling { state: BareState, overlap: f64 },

    #[error("hypergeometric parameter hits a pole at c = {0}")]
    Pole(Complex64),

    #[error("operator is not unitary (deviation {0:.3e})")]
    NonUnitaryInput(f64),

    #[error("{which} splitting {value_mhz:.5} MHz is too small for a selective protocol")]
    DegenerateSplitting { which: &'static str, value_mhz: f64 },

    #[error("bandwidth {sigma_mhz:.4} MHz outside the allowed range {allowed}")]
    BandwidthOutOfRange { sigma_mhz: f64, allowed: String },

    #[error("angle {theta:.6} rad outside the domain of {family}")]
    AngleOutOfDomain { theta: f64, family: String },

    #[error("integration tolerance not met: {0}")]
    ToleranceNotMet(String),

    #[error("projected gate is not diagonal (largest off-diagonal magnitude {0:.3e})")]
    NotDiagonal(f64),

    #[error("pulse constraint cannot be met: {0}")]
    InfeasibleConstraint(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::InvalidParams(_)
            | Error::DimensionOverflow { .. }
            | Error::Config(_)
            | Error::Io(_) => ErrorKind::Config,
            Error::AmbiguousLabeling { .. }
            | Error::DegenerateSplitting { .. }
            | Error::BandwidthOutOfRange { .. }
            | Error::AngleOutOfDomain { .. }
            | Error::InfeasibleConstraint(_) => ErrorKind::PhysicsDomain,
            Error::NonHermitian(_)
            | Error::Pole(_)
            | Error::NonUnitaryInput(_)
            | Error::ToleranceNotMet(_)
            | Error::NotDiagonal(_) => ErrorKind::Numerical,
        }
    }
}
