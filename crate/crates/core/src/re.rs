//! Effective reproduction number `R_e(η) = ρ(K · Diag(η))` and the
//! spectrum-preserving transformation laws it obeys.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::spectrum::DEFAULT_RESIDUAL_TOL;
use crate::linalg::{spectral_radius_of, spectrum_of, DenseMatrix, Spectrum, SpectrumOptions};
use crate::matrix::{NextGenMatrix, Strategy};
use crate::rng::trial_rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReReport {
    pub value: f64,
    pub effective_spectrum: Spectrum,
    pub r0: f64,
}

fn check_len(m: &NextGenMatrix, len: usize, what: &'static str) -> Result<()> {
    if len != m.n() {
        return Err(Error::DimensionMismatch {
            what,
            expected: m.n(),
            found: len,
        });
    }
    Ok(())
}

pub fn re(m: &NextGenMatrix, eta: &Strategy) -> Result<ReReport> {
    check_len(m, eta.len(), "strategy")?;
    let effective_spectrum = spectrum_of(
        &m.column_scaled(eta.as_slice()),
        &SpectrumOptions::with_tol(DEFAULT_RESIDUAL_TOL),
    )?;
    let r0 = spectral_radius_of(m.entries())?;
    Ok(ReReport {
        value: effective_spectrum.radius(),
        effective_spectrum,
        r0,
    })
}

/// `R_e(η)` alone; the same clustered radius as [`re`] without the
/// eigenvector residual pass.
pub fn re_value(m: &NextGenMatrix, eta: &[f64]) -> Result<f64> {
    check_len(m, eta.len(), "strategy")?;
    spectral_radius_of(&m.column_scaled(eta))
}

/// `R_0 = R_e(𝟙) = ρ(K)`.
pub fn r0(m: &NextGenMatrix) -> Result<f64> {
    spectral_radius_of(m.entries())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonotonicityWitness {
    pub trial: u64,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub re_lower: f64,
    pub re_upper: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HomogeneityWitness {
    pub trial: u64,
    pub eta: Vec<f64>,
    pub lambda: f64,
    pub re_scaled: f64,
    pub scaled_re: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElementaryReport {
    pub trials: u64,
    /// Absolute threshold used: `tol · max(1, R_0)`.
    pub threshold: f64,
    pub monotonicity_violations: Vec<MonotonicityWitness>,
    pub homogeneity_violations: Vec<HomogeneityWitness>,
}

impl ElementaryReport {
    pub fn passed(&self) -> bool {
        self.monotonicity_violations.is_empty() && self.homogeneity_violations.is_empty()
    }
}

/// Monotonicity `η₁ ≤ η₂ ⇒ R_e(η₁) ≤ R_e(η₂)` and homogeneity
/// `R_e(λη) = λ R_e(η)` over seeded random trials. Violations are reported,
/// not raised.
pub fn check_elementary_properties(
    m: &NextGenMatrix,
    trials: u64,
    seed: u64,
    tol: f64,
) -> Result<ElementaryReport> {
    let n = m.n();
    let threshold = tol * r0(m)?.max(1.0);
    let outcomes: Vec<(Option<MonotonicityWitness>, Option<HomogeneityWitness>)> = (0..trials)
        .into_par_iter()
        .map(|trial| -> Result<_> {
            let mut rng = trial_rng(seed, trial);
            let upper: Vec<f64> = (0..n).map(|_| rng.gen::<f64>()).collect();
            let lower: Vec<f64> = upper.iter().map(|u| u * rng.gen::<f64>()).collect();
            let lambda: f64 = rng.gen();
            let re_upper = re_value(m, &upper)?;
            let re_lower = re_value(m, &lower)?;
            let mono = (re_lower > re_upper + threshold).then(|| MonotonicityWitness {
                trial,
                lower: lower.clone(),
                upper: upper.clone(),
                re_lower,
                re_upper,
            });
            let scaled: Vec<f64> = upper.iter().map(|x| lambda * x).collect();
            let re_scaled = re_value(m, &scaled)?;
            let homo = ((re_scaled - lambda * re_upper).abs() > threshold).then(|| HomogeneityWitness {
                trial,
                eta: upper,
                lambda,
                re_scaled,
                scaled_re: lambda * re_upper,
            });
            Ok((mono, homo))
        })
        .collect::<Result<_>>()?;
    let (mono, homo): (Vec<_>, Vec<_>) = outcomes.into_iter().unzip();
    Ok(ElementaryReport {
        trials,
        threshold,
        monotonicity_violations: mono.into_iter().flatten().collect(),
        homogeneity_violations: homo.into_iter().flatten().collect(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvarianceCheck {
    pub name: String,
    /// Largest matched distance between the two spectra.
    pub deviation: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvarianceReport {
    pub tolerance: f64,
    pub checks: Vec<InvarianceCheck>,
}

impl InvarianceReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

/// Largest distance in a greedy matching of two flattened spectra
/// (infinite when the sizes differ).
pub fn spectrum_deviation(a: &Spectrum, b: &Spectrum) -> f64 {
    let (fa, fb) = (a.flatten(), b.flatten());
    if fa.len() != fb.len() {
        return f64::INFINITY;
    }
    let mut used = vec![false; fb.len()];
    let mut worst = 0.0f64;
    for x in &fa {
        let (j, d) = fb
            .iter()
            .enumerate()
            .filter(|(j, _)| !used[*j])
            .map(|(j, y)| (j, (x - y).norm()))
            .min_by(|l, r| l.1.total_cmp(&r.1))
            .expect("equal lengths");
        used[j] = true;
        worst = worst.max(d);
    }
    worst
}

fn effective(a: &DenseMatrix) -> Result<Spectrum> {
    spectrum_of(
        a,
        &SpectrumOptions {
            verify_residuals: false,
            ..SpectrumOptions::default()
        },
    )
}

/// Checks that the effective spectrum is unchanged by
/// (a) diagonal conjugation `Diag(h) K Diag(1/h)`,
/// (b) transposition of `K`, and
/// (c) moving the multiplier `Diag(h)` from the left of `K Diag(η)` to its right.
pub fn check_transform_invariance(m: &NextGenMatrix, h: &[f64], eta: &Strategy) -> Result<InvarianceReport> {
    check_len(m, h.len(), "multiplier")?;
    check_len(m, eta.len(), "strategy")?;
    if let Some(i) = h.iter().position(|x| !(x.is_finite() && *x > 0.0)) {
        return Err(Error::InvalidInput(format!("multiplier entry {i} = {} is not positive", h[i])));
    }
    let eta = eta.as_slice();
    let k = m.entries();
    let inv_h: Vec<f64> = h.iter().map(|x| 1.0 / x).collect();
    let base = effective(&k.scale_columns(eta))?;
    let tolerance = base.cluster_radius;

    let conjugated = k.scale_rows(h).scale_columns(&inv_h).scale_columns(eta);
    let transposed = k.transpose().scale_columns(eta);
    let left = k.scale_columns(eta).scale_rows(h);
    let right = k.scale_columns(h).scale_columns(eta);

    let mut checks = Vec::new();
    let mut push = |name: &str, a: &Spectrum, b: &Spectrum| {
        let deviation = spectrum_deviation(a, b);
        checks.push(InvarianceCheck {
            name: name.to_string(),
            deviation,
            passed: deviation <= tolerance,
        });
    };
    push("diagonal-conjugation", &effective(&conjugated)?, &base);
    push("transpose", &effective(&transposed)?, &base);
    push("multiplier-side", &effective(&left)?, &effective(&right)?);
    Ok(InvarianceReport { tolerance, checks })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn zero_strategy_gives_zero() {
        let m = fixtures::counter_convex();
        let r = re(&m, &Strategy::zeros(3)).unwrap();
        assert_eq!(r.value, 0.0);
    }

    #[test]
    fn ones_strategy_gives_r0() {
        let m = fixtures::counter_convex();
        let r = re(&m, &Strategy::ones(3)).unwrap();
        assert!((r.value - 24.8).abs() < 0.05);
        assert_eq!(r.value, r.r0);
        assert_eq!(r.value, r.effective_spectrum.radius());
    }

    #[test]
    fn rank_one_closed_form() {
        // f = (1, 2), g = (3, 1): K = f gᵀ; R_e(η) = Σ f_i g_i η_i
        let m = NextGenMatrix::from_rows(&[[3.0, 1.0], [6.0, 2.0]]).unwrap();
        let r = re(&m, &Strategy::new(vec![1.0, 0.5]).unwrap()).unwrap();
        assert!((r.value - 4.0).abs() < 1e-12);
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let m = fixtures::friedland();
        assert!(matches!(re(&m, &Strategy::ones(2)), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn elementary_properties_hold_on_counterexample() {
        let rep = check_elementary_properties(&fixtures::counter_convex(), 1000, 11, 1e-9).unwrap();
        assert!(rep.passed(), "{rep:?}");
    }

    #[test]
    fn elementary_checks_are_deterministic() {
        let m = fixtures::counter_concave();
        let a = check_elementary_properties(&m, 50, 3, 1e-9).unwrap();
        let b = check_elementary_properties(&m, 50, 3, 1e-9).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn homogeneity_endpoints() {
        let m = fixtures::counter_concave();
        let eta = [0.2, 0.7, 0.4];
        assert_eq!(re_value(&m, &[0.0; 3]).unwrap(), 0.0);
        let full = re_value(&m, &eta).unwrap();
        let same = re_value(&m, &eta.map(|x| 1.0 * x)).unwrap();
        assert_eq!(full, same);
    }

    #[test]
    fn invariance_unit_multiplier_and_hand_example() {
        let m = NextGenMatrix::from_rows(&[[0.0, 2.0], [8.0, 0.0]]).unwrap();
        let rep = check_transform_invariance(&m, &[1.0, 1.0], &Strategy::ones(2)).unwrap();
        assert!(rep.passed());
        assert!(rep.checks.iter().all(|c| c.deviation == 0.0));

        let conj = m.entries().scale_rows(&[1.0, 2.0]).scale_columns(&[1.0, 0.5]);
        assert_eq!(conj.to_rows(), vec![vec![0.0, 1.0], vec![16.0, 0.0]]);
        let rep = check_transform_invariance(&m, &[1.0, 2.0], &Strategy::ones(2)).unwrap();
        assert!(rep.passed(), "{rep:?}");
    }

    #[test]
    fn invariance_rejects_nonpositive_multiplier() {
        let m = fixtures::friedland();
        assert!(check_transform_invariance(&m, &[1.0, 0.0, 1.0], &Strategy::ones(3)).is_err());
    }
}
