//! Dense linear-algebra substrate: eigenvalues, spectra, inertia, Perron pairs.

pub mod dense;
pub(crate) mod eigen;
pub mod lu;
pub mod perron;
pub mod spectrum;
pub mod symmetric;

pub use dense::DenseMatrix;
pub use perron::{perron_pair_of, PerronPair};
pub use spectrum::{
    cluster, inertia, multiset_close, spectral_radius_of, spectrum_of, Eigenvalue, Inertia, Spectrum,
    SpectrumOptions,
};
pub use symmetric::symmetric_eigen;

use crate::error::Result;
use crate::matrix::NextGenMatrix;

/// All eigenvalues of the plain matrix (weights ignored), clustered, with
/// eigenpair residuals checked against `tol`.
pub fn spectrum(m: &NextGenMatrix, tol: f64) -> Result<Spectrum> {
    spectrum_of(m.entries(), &SpectrumOptions::with_tol(tol))
}

/// `max |λ|` over the clustered spectrum.
pub fn spectral_radius(m: &NextGenMatrix) -> Result<f64> {
    spectral_radius_of(m.entries())
}

pub fn perron_pair(m: &NextGenMatrix) -> Result<PerronPair> {
    perron_pair_of(m.entries())
}
