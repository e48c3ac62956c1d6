use serde::{Deserialize, Serialize};

use super::dense::DenseMatrix;
use super::lu::Lu;
use super::spectrum::spectral_radius_of;
use crate::error::{Error, Result};

/// Radius below `PERRON_ZERO_REL · max(1, ‖M‖_F)` counts as quasi-nilpotent.
pub const PERRON_ZERO_REL: f64 = 1e-12;
const SHIFT_REL: f64 = 1e-10;
const RESIDUAL_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerronPair {
    pub radius: f64,
    /// Right eigenvector, unit 1-norm, entrywise nonnegative.
    pub right: Vec<f64>,
    /// Left eigenvector, unit 1-norm, entrywise nonnegative.
    pub left: Vec<f64>,
}

fn clamp_normalize(v: &mut [f64]) {
    let scale = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    // Resolvent iterates are nonnegative up to rounding; a negative-dominated
    // vector is just the same direction with the opposite sign.
    if v.iter().sum::<f64>() < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
    for x in v.iter_mut() {
        if *x < 0.0 && *x >= -1e-9 * scale {
            *x = 0.0;
        }
    }
    let s: f64 = v.iter().map(|x| x.abs()).sum();
    if s > 0.0 {
        v.iter_mut().for_each(|x| *x /= s);
    }
}

/// Perron root with nonnegative right and left eigenvectors, by inverse
/// iteration with a shift just above the spectral radius. The shifted
/// resolvent `(σI − M)⁻¹` is entrywise nonnegative for σ > ρ(M), so the
/// iterates stay in the nonnegative cone.
pub fn perron_pair_of(m: &DenseMatrix) -> Result<PerronPair> {
    let n = m.n();
    let radius = spectral_radius_of(m)?;
    let norm = m.frobenius_norm();
    if radius <= PERRON_ZERO_REL * norm.max(1.0) {
        return Err(Error::QuasiNilpotent { radius });
    }
    let sigma = radius * (1.0 + SHIFT_REL);
    let shifted = DenseMatrix::from_fn(n, |i, j| if i == j { sigma } else { 0.0 } - m[(i, j)]);
    let lu = Lu::new(&shifted, f64::EPSILON * sigma);

    let mut right = vec![1.0 / n as f64; n];
    let mut left = right.clone();
    for _ in 0..4 {
        right = lu.solve(&right);
        clamp_normalize(&mut right);
        left = lu.solve_transpose(&left);
        clamp_normalize(&mut left);
    }

    let check = |v: &[f64], mv: Vec<f64>| -> f64 {
        let vnorm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        let r: f64 = mv.iter().zip(v).map(|(a, b)| (a - radius * b).powi(2)).sum::<f64>().sqrt();
        r / (norm * vnorm)
    };
    let res_right = check(&right, m.mul_vec(&right));
    let res_left = check(&left, m.vec_mul(&left));
    let worst = res_right.max(res_left);
    if !(worst <= RESIDUAL_TOL) {
        return Err(Error::ResidualTooLarge {
            eigenvalue: radius.into(),
            residual: worst,
            tol: RESIDUAL_TOL,
        });
    }
    for v in [&mut right, &mut left] {
        v.iter_mut().for_each(|x| *x = x.max(0.0));
        let s: f64 = v.iter().sum();
        v.iter_mut().for_each(|x| *x /= s);
    }
    Ok(PerronPair { radius, right, left })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn antidiagonal_pair() {
        let p = perron_pair_of(&DenseMatrix::from_rows(&[[0.0, 2.0], [8.0, 0.0]])).unwrap();
        assert!((p.radius - 4.0).abs() < 1e-12);
        assert!(close(&p.right, &[1.0 / 3.0, 2.0 / 3.0], 1e-9));
        assert!(close(&p.left, &[2.0 / 3.0, 1.0 / 3.0], 1e-9));
    }

    #[test]
    fn identity_pair_is_uniform() {
        let p = perron_pair_of(&DenseMatrix::identity(2)).unwrap();
        assert!((p.radius - 1.0).abs() < 1e-14);
        assert!(close(&p.right, &[0.5, 0.5], 1e-12));
        assert!(close(&p.left, &[0.5, 0.5], 1e-12));
    }

    #[test]
    fn rank_one_pair() {
        // f gᵀ with f = (1, 2), g = (3, 1)
        let m = DenseMatrix::from_rows(&[[3.0, 1.0], [6.0, 2.0]]);
        let p = perron_pair_of(&m).unwrap();
        assert!((p.radius - 5.0).abs() < 1e-12);
        assert!(close(&p.right, &[1.0 / 3.0, 2.0 / 3.0], 1e-9));
        assert!(close(&p.left, &[0.75, 0.25], 1e-9));
    }

    #[test]
    fn nilpotent_is_rejected() {
        let m = DenseMatrix::from_rows(&[[0.0, 1.0], [0.0, 0.0]]);
        assert!(matches!(perron_pair_of(&m), Err(Error::QuasiNilpotent { .. })));
    }
}
