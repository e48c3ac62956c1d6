use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::matrix::NextGenMatrix;
use crate::re::{r0, re_value};
use crate::rng::trial_rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Convexity,
    Concavity,
}

/// A chord test that failed: `gap = R_e(θη₀ + (1−θ)η₁) − [θ R_e(η₀) + (1−θ) R_e(η₁)]`.
/// Positive gaps break convexity, negative gaps break concavity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapeViolation {
    pub mode: Mode,
    pub sample: u64,
    pub eta0: Vec<f64>,
    pub eta1: Vec<f64>,
    pub theta: f64,
    pub re_eta0: f64,
    pub re_eta1: f64,
    pub re_mix: f64,
    pub gap: f64,
    pub margin: f64,
}

impl ShapeViolation {
    /// Recomputes the gap from the stored strategies.
    pub fn replay(&self, m: &NextGenMatrix) -> Result<f64> {
        chord_gap(m, &self.eta0, &self.eta1, self.theta).map(|(_, _, _, g)| g)
    }
}

/// `1e-7 · (1 + R_0)`.
pub fn default_margin(r0: f64) -> f64 {
    1e-7 * (1.0 + r0)
}

fn chord_gap(m: &NextGenMatrix, eta0: &[f64], eta1: &[f64], theta: f64) -> Result<(f64, f64, f64, f64)> {
    let mix: Vec<f64> = eta0
        .iter()
        .zip(eta1)
        .map(|(a, b)| (theta * a + (1.0 - theta) * b).clamp(0.0, 1.0))
        .collect();
    let r_a = re_value(m, eta0)?;
    let r_b = re_value(m, eta1)?;
    let r_mix = re_value(m, &mix)?;
    Ok((r_a, r_b, r_mix, r_mix - (theta * r_a + (1.0 - theta) * r_b)))
}

/// Draws a strategy from one of three families: the uniform box, a
/// coordinate-sparse box, or the plane `Σ η_i = 1/3` (uniform on the simplex
/// face, scaled).
pub(crate) fn sample_strategy<R: Rng>(rng: &mut R, n: usize, family: u64) -> Vec<f64> {
    match family % 3 {
        0 => (0..n).map(|_| rng.gen::<f64>()).collect(),
        1 => (0..n)
            .map(|_| if rng.gen_bool(0.5) { 0.0 } else { rng.gen::<f64>() })
            .collect(),
        _ => {
            let e: Vec<f64> = (0..n).map(|_| -(1.0 - rng.gen::<f64>()).ln()).collect();
            let s: f64 = e.iter().sum();
            e.into_iter().map(|x| (x / s / 3.0).min(1.0)).collect()
        }
    }
}

pub fn find_shape_violation(m: &NextGenMatrix, mode: Mode, samples: u64, seed: u64) -> Result<Option<ShapeViolation>> {
    let margin = default_margin(r0(m)?);
    find_shape_violation_with(m, mode, samples, seed, margin)
}

/// Samples `(η₀, η₁, θ)` and returns the earliest sample whose chord gap
/// exceeds `margin` in the direction that breaks `mode`. Sample `s` uses
/// its own random stream, so the result does not depend on scheduling.
pub fn find_shape_violation_with(
    m: &NextGenMatrix,
    mode: Mode,
    samples: u64,
    seed: u64,
    margin: f64,
) -> Result<Option<ShapeViolation>> {
    let n = m.n();
    let found = (0..samples)
        .into_par_iter()
        .map(|s| -> Result<Option<ShapeViolation>> {
            let mut rng = trial_rng(seed, s);
            let eta0 = sample_strategy(&mut rng, n, s);
            let eta1 = sample_strategy(&mut rng, n, s / 3);
            let theta = if s % 2 == 0 {
                0.5
            } else {
                rng.gen_range(f64::EPSILON..1.0)
            };
            let (re_eta0, re_eta1, re_mix, gap) = chord_gap(m, &eta0, &eta1, theta)?;
            let violated = match mode {
                Mode::Convexity => gap > margin,
                Mode::Concavity => gap < -margin,
            };
            Ok(violated.then(|| ShapeViolation {
                mode,
                sample: s,
                eta0,
                eta1,
                theta,
                re_eta0,
                re_eta1,
                re_mix,
                gap,
                margin,
            }))
        })
        .find_first(|r| !matches!(r, Ok(None)));
    match found {
        None => Ok(None),
        Some(r) => r,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn convex_counterexample_breaks_convexity() {
        let m = fixtures::counter_convex();
        let v = find_shape_violation(&m, Mode::Convexity, 10_000, 1).unwrap().expect("violation");
        assert!(v.gap > v.margin);
        assert!((v.replay(&m).unwrap() - v.gap).abs() <= 1e-10);
    }

    #[test]
    fn friedland_has_no_convexity_violation() {
        assert!(find_shape_violation(&fixtures::friedland(), Mode::Convexity, 10_000, 1).unwrap().is_none());
    }

    #[test]
    fn rank_one_is_linear() {
        let m = NextGenMatrix::from_rows(&[[3.0, 1.0], [6.0, 2.0]]).unwrap();
        for mode in [Mode::Convexity, Mode::Concavity] {
            assert!(find_shape_violation(&m, mode, 10_000, 5).unwrap().is_none());
        }
    }

    #[test]
    fn plane_family_sums_to_a_third() {
        let mut rng = trial_rng(0, 0);
        let eta = sample_strategy(&mut rng, 5, 2);
        assert!((eta.iter().sum::<f64>() - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn search_is_deterministic() {
        let m = fixtures::counter_concave();
        let a = find_shape_violation(&m, Mode::Concavity, 2000, 9).unwrap();
        let b = find_shape_violation(&m, Mode::Concavity, 2000, 9).unwrap();
        assert_eq!(a, b);
    }
}
