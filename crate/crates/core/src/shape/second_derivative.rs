use serde::{Deserialize, Serialize};

use super::spectral_inertia;
use crate::error::{Error, Result};
use crate::linalg::symmetric_eigen;
use crate::matrix::{NextGenMatrix, Strategy};
use crate::re::re_value;
use crate::symmetrize::{symmetric_form, SymmetrizationCertificate};

/// Entrywise lower bound on both strategies.
pub const DEFAULT_ETA_FLOOR: f64 = 1e-6;
pub const DEFAULT_FD_STEP: f64 = 1e-4;
const DEFAULT_GAP_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SecondDerivativeTerm {
    pub lambda: f64,
    /// `a_n² ⟨u_n, u_n⟩_α`.
    pub coefficient: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SecondDerivativeReport {
    pub alpha: f64,
    pub r_alpha: f64,
    pub r_second: f64,
    pub terms: Vec<SecondDerivativeTerm>,
    pub fd_estimate: f64,
    pub fd_step: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SecondDerivativeOptions {
    pub eta_floor: f64,
    pub fd_step: f64,
    /// Relative spectral gap below which `R(α)` counts as degenerate.
    pub gap_tol: f64,
}

impl Default for SecondDerivativeOptions {
    fn default() -> Self {
        Self {
            eta_floor: DEFAULT_ETA_FLOOR,
            fd_step: DEFAULT_FD_STEP,
            gap_tol: DEFAULT_GAP_TOL,
        }
    }
}

pub fn second_derivative(
    m: &NextGenMatrix,
    cert: &SymmetrizationCertificate,
    eta0: &Strategy,
    eta1: &Strategy,
    alpha: f64,
) -> Result<SecondDerivativeReport> {
    second_derivative_with(m, cert, eta0, eta1, alpha, &SecondDerivativeOptions::default())
}

/// `R''(α)` along `η_α = (1−α)η₀ + αη₁` for a symmetrizable `K` with one
/// positive eigenvalue.
///
/// `K Diag(η_α)` is self-adjoint for `⟨u,v⟩_α = Σ d_i η_α,i u_i v_i`, so with
/// `H = Diag(η_α)` the matrix `S_α = H^{1/2} D^{1/2} K D^{-1/2} H^{1/2}` is
/// symmetric and shares its spectrum. With orthonormal eigenvectors `z_n`
/// of `S_α` and `N = Diag((η₁−η₀)/η_α)`,
/// `R'' = 2R Σ_{n≥1} λ_n/(R−λ_n) (z_nᵀ N z_0)²`.
pub fn second_derivative_with(
    m: &NextGenMatrix,
    cert: &SymmetrizationCertificate,
    eta0: &Strategy,
    eta1: &Strategy,
    alpha: f64,
    opts: &SecondDerivativeOptions,
) -> Result<SecondDerivativeReport> {
    let n = m.n();
    for eta in [eta0, eta1] {
        if eta.len() != n {
            return Err(Error::DimensionMismatch {
                what: "strategy",
                expected: n,
                found: eta.len(),
            });
        }
        if let Some(x) = eta.as_slice().iter().find(|x| **x < opts.eta_floor) {
            return Err(Error::Precondition(format!(
                "strategy entry {x} is below the floor {}; strategies must be bounded away from zero",
                opts.eta_floor
            )));
        }
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidInput(format!("alpha = {alpha} must lie in (0, 1)")));
    }
    let inertia = spectral_inertia(m)?;
    if inertia.positive_count != 1 {
        return Err(Error::Precondition(format!(
            "expected exactly one positive eigenvalue, found {}",
            inertia.positive_count
        )));
    }

    let (e0, e1) = (eta0.as_slice(), eta1.as_slice());
    let eta_at = |a: f64| -> Vec<f64> { e0.iter().zip(e1).map(|(x, y)| (1.0 - a) * x + a * y).collect() };
    let eta = eta_at(alpha);
    let root: Vec<f64> = eta.iter().map(|x| x.sqrt()).collect();
    let s = symmetric_form(m, cert)?.scale_rows(&root).scale_columns(&root);
    let (values, vectors) = symmetric_eigen(&s);
    let r = values[0];
    let gap = if n > 1 { r - values[1] } else { f64::INFINITY };
    let gap_tol = opts.gap_tol * r.abs().max(1.0);
    if gap < gap_tol {
        return Err(Error::IllConditioned { gap, tol: gap_tol });
    }

    let ratio: Vec<f64> = (0..n).map(|i| (e1[i] - e0[i]) / eta[i]).collect();
    let band = 1e-9 * r.max(1.0);
    let mut terms = Vec::new();
    let mut sum = 0.0;
    for k in 1..n {
        let lambda = values[k];
        if lambda.abs() <= band {
            continue;
        }
        let a: f64 = (0..n).map(|i| vectors[(i, k)] * ratio[i] * vectors[(i, 0)]).sum();
        let coefficient = a * a;
        sum += lambda / (r - lambda) * coefficient;
        terms.push(SecondDerivativeTerm { lambda, coefficient });
    }

    let h = opts.fd_step.min(alpha / 2.0).min((1.0 - alpha) / 2.0);
    let central = |h: f64| -> Result<f64> {
        let plus = re_value(m, &eta_at(alpha + h))?;
        let mid = re_value(m, &eta)?;
        let minus = re_value(m, &eta_at(alpha - h))?;
        Ok((plus - 2.0 * mid + minus) / (h * h))
    };
    let coarse = central(h)?;
    let fine = central(h / 2.0)?;

    Ok(SecondDerivativeReport {
        alpha,
        r_alpha: r,
        r_second: 2.0 * r * sum,
        terms,
        fd_estimate: (4.0 * fine - coarse) / 3.0,
        fd_step: h,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symmetrize::{symmetrize, DEFAULT_SUPPORT_TOL};

    fn cert(m: &NextGenMatrix) -> SymmetrizationCertificate {
        symmetrize(m, DEFAULT_SUPPORT_TOL).unwrap().certificate().unwrap().clone()
    }

    #[test]
    fn swap_matrix_matches_closed_form() {
        let m = NextGenMatrix::from_rows(&[[0.0, 1.0], [1.0, 0.0]]).unwrap();
        let e0 = Strategy::new(vec![1.0, 0.5]).unwrap();
        let e1 = Strategy::new(vec![0.5, 1.0]).unwrap();
        let rep = second_derivative(&m, &cert(&m), &e0, &e1, 0.5).unwrap();
        // R(α) = √((1 − α/2)(1/2 + α/2)); R'' = −(f'g − fg')²/(4(fg)^{3/2}) with f' = −1/2, g' = 1/2
        let (f, g) = (0.75f64, 0.75f64);
        let exact = -((-0.5 * g - 0.5 * f).powi(2)) / (4.0 * (f * g).powf(1.5));
        assert!(rep.r_second < 0.0);
        assert!((rep.r_second - exact).abs() < 1e-12, "{} vs {exact}", rep.r_second);
        assert!((rep.r_second - rep.fd_estimate).abs() <= 1e-5 * (1.0 + rep.r_second.abs()));
        assert!(rep.terms.iter().all(|t| t.lambda < 0.0));
    }

    #[test]
    fn rank_one_has_no_terms() {
        let m = NextGenMatrix::from_rows(&[[3.0, 1.0], [6.0, 2.0]]).unwrap();
        let e0 = Strategy::new(vec![0.2, 0.9]).unwrap();
        let e1 = Strategy::new(vec![0.7, 0.1]).unwrap();
        let rep = second_derivative(&m, &cert(&m), &e0, &e1, 0.3).unwrap();
        assert!(rep.terms.is_empty());
        assert_eq!(rep.r_second, 0.0);
        assert!(rep.fd_estimate.abs() < 1e-5);
    }

    #[test]
    fn rejects_two_positive_eigenvalues() {
        let m = NextGenMatrix::from_rows(&[[3.0, 2.0, 0.0], [2.0, 2.0, 1.0], [0.0, 1.0, 4.0]]).unwrap();
        let e = Strategy::ones(3);
        assert!(matches!(
            second_derivative(&m, &cert(&m), &e, &e, 0.5),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn rejects_strategies_touching_zero() {
        let m = NextGenMatrix::from_rows(&[[0.0, 1.0], [1.0, 0.0]]).unwrap();
        let e0 = Strategy::new(vec![1.0, 0.0]).unwrap();
        let e1 = Strategy::ones(2);
        assert!(matches!(
            second_derivative(&m, &cert(&m), &e0, &e1, 0.5),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn degenerate_top_eigenvalue_is_ill_conditioned() {
        // the gap here is 2; an oversized tolerance forces the degenerate branch
        let m = NextGenMatrix::from_rows(&[[0.0, 1.0], [1.0, 0.0]]).unwrap();
        let e = Strategy::ones(2);
        let opts = SecondDerivativeOptions {
            gap_tol: 10.0,
            ..Default::default()
        };
        assert!(matches!(
            second_derivative_with(&m, &cert(&m), &e, &e, 0.5, &opts),
            Err(Error::IllConditioned { .. })
        ));
    }
}
