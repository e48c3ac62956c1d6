use num_complex::Complex64;
use thiserror::Error;

/// State of the QR iteration at the moment it gave up.
#[derive(Debug, Clone, PartialEq)]
pub struct PartialReduction {
    /// Row-major upper Hessenberg matrix as left by the iteration.
    pub hessenberg: Vec<f64>,
    pub n: usize,
    /// Eigenvalues already deflated before the failure.
    pub found: Vec<Complex64>,
}

#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch for {what}: expected {expected}, got {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("QR iteration did not converge after {sweeps} sweeps ({} eigenvalues found)", .partial.found.len())]
    NoConvergence {
        sweeps: usize,
        partial: Box<PartialReduction>,
    },

    #[error("eigenpair residual {residual:e} exceeds tolerance {tol:e} at eigenvalue {eigenvalue}")]
    ResidualTooLarge {
        eigenvalue: Complex64,
        residual: f64,
        tol: f64,
    },

    #[error("spectral radius {radius:e} is numerically zero (quasi-nilpotent input)")]
    QuasiNilpotent { radius: f64 },

    #[error("leading eigenvalue is not simple (clustered multiplicity {multiplicity})")]
    NotSimple { multiplicity: usize },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("ill-conditioned: gap {gap:e} between leading and next eigenvalue is below {tol:e}")]
    IllConditioned { gap: f64, tol: f64 },

    #[error("infeasible problem: {0}")]
    Infeasible(String),

    #[error("inconsistent factorization: {0}")]
    Inconsistent(String),
}

impl Error {
    /// True for failures of the numerical machinery rather than of the input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NoConvergence { .. }
                | Error::ResidualTooLarge { .. }
                | Error::QuasiNilpotent { .. }
                | Error::NotSimple { .. }
                | Error::IllConditioned { .. }
                | Error::Inconsistent(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
