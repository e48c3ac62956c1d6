//! Convexity and concavity of `R_e`.
//!
//! For a diagonally symmetrizable `K`, a spectrum without negative
//! eigenvalues makes `R_e` convex, and a single positive eigenvalue (counted
//! with multiplicity) makes it concave. Outside those certificates the only
//! evidence is a sampled violation; finding none is reported as
//! inconclusive.

mod second_derivative;
mod surface;
mod violation;

use serde::{Deserialize, Serialize};

pub use second_derivative::{
    second_derivative, second_derivative_with, SecondDerivativeOptions, SecondDerivativeReport, SecondDerivativeTerm,
    DEFAULT_ETA_FLOOR, DEFAULT_FD_STEP,
};
pub use surface::{plane_surface, GridViolation, PlaneSurface, SurfacePoint};
pub use violation::{default_margin, find_shape_violation, find_shape_violation_with, Mode, ShapeViolation};

use crate::error::Result;
use crate::linalg::{inertia, spectrum_of, Inertia, SpectrumOptions};
use crate::matrix::NextGenMatrix;
use crate::re::r0;
use crate::symmetrize::{symmetrize, Symmetrization, SymmetrizationCertificate, SymmetrizationObstruction, DEFAULT_SUPPORT_TOL};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Classification {
    ConvexCertified,
    ConcaveCertified,
    LinearCertified,
    ViolationFound,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapeCertificate {
    pub symmetrization: SymmetrizationCertificate,
    pub inertia: Inertia,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapeVerdict {
    pub classification: Classification,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub certificate: Option<ShapeCertificate>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub obstruction: Option<SymmetrizationObstruction>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub convexity_violation: Option<ShapeViolation>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub concavity_violation: Option<ShapeViolation>,
    /// Samples drawn per mode when a search was run.
    pub samples: u64,
    pub seed: u64,
}

impl ShapeVerdict {
    pub fn is_convex_certified(&self) -> bool {
        matches!(self.classification, Classification::ConvexCertified | Classification::LinearCertified)
    }

    pub fn is_concave_certified(&self) -> bool {
        matches!(self.classification, Classification::ConcaveCertified | Classification::LinearCertified)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassifyOptions {
    pub samples: u64,
    pub seed: u64,
    /// `None` uses [`default_margin`].
    pub margin: Option<f64>,
}

impl Default for ClassifyOptions {
    fn default() -> Self {
        Self {
            samples: 10_000,
            seed: 0,
            margin: None,
        }
    }
}

/// Inertia of the spectrum of `K` with the default zero band.
pub fn spectral_inertia(m: &NextGenMatrix) -> Result<Inertia> {
    let spec = spectrum_of(
        m.entries(),
        &SpectrumOptions {
            verify_residuals: false,
            ..SpectrumOptions::default()
        },
    )?;
    inertia(&spec, spec.default_zero_band())
}

pub fn classify_shape(m: &NextGenMatrix) -> Result<ShapeVerdict> {
    classify_shape_with(m, &ClassifyOptions::default())
}

pub fn classify_shape_with(m: &NextGenMatrix, opts: &ClassifyOptions) -> Result<ShapeVerdict> {
    let mut verdict = ShapeVerdict {
        classification: Classification::Inconclusive,
        certificate: None,
        obstruction: None,
        convexity_violation: None,
        concavity_violation: None,
        samples: 0,
        seed: opts.seed,
    };
    match symmetrize(m, DEFAULT_SUPPORT_TOL)? {
        Symmetrization::Certified(cert) => {
            let inertia = spectral_inertia(m)?;
            let convex = inertia.negative_count == 0;
            let concave = inertia.positive_count == 1;
            let classification = match (convex, concave) {
                (true, true) => Some(Classification::LinearCertified),
                (true, false) => Some(Classification::ConvexCertified),
                (false, true) => Some(Classification::ConcaveCertified),
                (false, false) => None,
            };
            if let Some(c) = classification {
                verdict.classification = c;
                verdict.certificate = Some(ShapeCertificate {
                    symmetrization: cert,
                    inertia,
                });
                return Ok(verdict);
            }
        }
        Symmetrization::Obstructed(o) => verdict.obstruction = Some(o),
    }

    let margin = match opts.margin {
        Some(x) => x,
        None => default_margin(r0(m)?),
    };
    verdict.samples = opts.samples;
    verdict.convexity_violation = find_shape_violation_with(m, Mode::Convexity, opts.samples, opts.seed, margin)?;
    verdict.concavity_violation = find_shape_violation_with(m, Mode::Concavity, opts.samples, opts.seed, margin)?;
    if verdict.convexity_violation.is_some() || verdict.concavity_violation.is_some() {
        verdict.classification = Classification::ViolationFound;
    }
    Ok(verdict)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn friedland_is_convex_certified() {
        let v = classify_shape(&fixtures::friedland()).unwrap();
        assert_eq!(v.classification, Classification::ConvexCertified);
        assert_eq!(v.certificate.unwrap().inertia.negative_count, 0);
    }

    #[test]
    fn swap_matrix_is_concave_certified() {
        let m = NextGenMatrix::from_rows(&[[0.0, 1.0], [1.0, 0.0]]).unwrap();
        let v = classify_shape(&m).unwrap();
        assert_eq!(v.classification, Classification::ConcaveCertified);
    }

    #[test]
    fn rank_one_is_linear_certified() {
        let m = NextGenMatrix::from_rows(&[[3.0, 1.0], [6.0, 2.0]]).unwrap();
        assert_eq!(classify_shape(&m).unwrap().classification, Classification::LinearCertified);
    }

    #[test]
    fn concave_counterexample_violates_both() {
        let v = classify_shape(&fixtures::counter_concave()).unwrap();
        assert_eq!(v.classification, Classification::ViolationFound);
        assert!(v.convexity_violation.is_some());
        assert!(v.concavity_violation.is_some());
        assert!(v.obstruction.is_some());
    }

    #[test]
    fn non_symmetrizable_without_violation_is_inconclusive() {
        // upper triangular with one atom: R_e(η) = max(η₁, 0), linear on Δ
        let m = NextGenMatrix::from_rows(&[[1.0, 1.0], [0.0, 0.0]]).unwrap();
        let v = classify_shape_with(&m, &ClassifyOptions { samples: 300, ..Default::default() }).unwrap();
        assert_eq!(v.classification, Classification::Inconclusive);
        assert!(v.certificate.is_none());
    }
}
