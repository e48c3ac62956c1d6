//! Budget-constrained minimization of `R_e`.
//!
//! The feasible set is `{η ∈ [0,1]^N : Σ c_i (1 − η_i) ≤ B}`: vaccinating a
//! fraction `1 − η_i` of group `i` costs `c_i` per unit. The method follows
//! the shape certificate: projected gradient for convex `R_e`, extreme-point
//! enumeration for concave `R_e`, and multi-start projected gradient with no
//! optimality claim otherwise.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frobenius::atomic_decomposition;
use crate::linalg::{perron_pair_of, spectrum_of, DenseMatrix, SpectrumOptions};
use crate::matrix::{NextGenMatrix, Strategy};
use crate::re::re_value;
use crate::rng::trial_rng;
use crate::shape::{Classification, ShapeVerdict};

/// Projected-gradient stopping threshold on `‖η − P(η − ∇R_e)‖_∞`.
pub const GRADIENT_TOL: f64 = 1e-7;
/// Largest number of atom coordinates enumerated exactly.
pub const MAX_VERTEX_DIM: usize = 20;
pub const FEASIBILITY_TOL: f64 = 1e-9;
const JITTER: f64 = 1e-10;
const MULTI_STARTS: u64 = 8;
pub const COST_MODEL: &str = "linear";

#[derive(Debug, Clone, PartialEq)]
pub struct BudgetProblem {
    matrix: NextGenMatrix,
    cost_weights: Vec<f64>,
    budget: f64,
}

impl BudgetProblem {
    /// `costs` defaults to the matrix weights.
    pub fn new(matrix: NextGenMatrix, costs: Option<Vec<f64>>, budget: f64) -> Result<Self> {
        let cost_weights = costs.unwrap_or_else(|| matrix.weights().to_vec());
        if cost_weights.len() != matrix.n() {
            return Err(Error::DimensionMismatch {
                what: "cost weights",
                expected: matrix.n(),
                found: cost_weights.len(),
            });
        }
        if let Some(c) = cost_weights.iter().find(|c| !(c.is_finite() && **c > 0.0)) {
            return Err(Error::InvalidInput(format!("cost weight {c} must be positive")));
        }
        let total: f64 = cost_weights.iter().sum();
        if !(budget.is_finite() && budget >= 0.0 && budget <= total * (1.0 + 1e-12)) {
            return Err(Error::Infeasible(format!("budget {budget} must lie in [0, {total}]")));
        }
        Ok(Self {
            matrix,
            cost_weights,
            budget: budget.min(total),
        })
    }

    pub fn matrix(&self) -> &NextGenMatrix {
        &self.matrix
    }

    pub fn cost_weights(&self) -> &[f64] {
        &self.cost_weights
    }

    pub fn budget(&self) -> f64 {
        self.budget
    }

    pub fn total_cost(&self) -> f64 {
        self.cost_weights.iter().sum()
    }

    /// `Σ c_i (1 − η_i)`.
    pub fn cost(&self, eta: &[f64]) -> f64 {
        self.cost_weights.iter().zip(eta).map(|(c, e)| c * (1.0 - e)).sum()
    }

    pub fn is_feasible(&self, eta: &[f64]) -> bool {
        eta.len() == self.matrix.n()
            && eta.iter().all(|e| (0.0..=1.0).contains(e))
            && self.cost(eta) <= self.budget + FEASIBILITY_TOL
    }

    /// Euclidean projection onto the feasible set: clamp to the box, and if
    /// the budget is exceeded, shift along `c` by the `τ` that makes it tight.
    pub fn project(&self, y: &[f64]) -> Vec<f64> {
        let c = &self.cost_weights;
        let at = |tau: f64| -> Vec<f64> { y.iter().zip(c).map(|(y, c)| (y + tau * c).clamp(0.0, 1.0)).collect() };
        let clamped = at(0.0);
        if self.cost(&clamped) <= self.budget {
            return clamped;
        }
        let mut lo = 0.0;
        let mut hi = y.iter().zip(c).map(|(y, c)| (1.0 - y) / c).fold(0.0, f64::max);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.cost(&at(mid)) <= self.budget {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        at(hi)
    }

    /// Spends the budget evenly: `η_i = 1 − B/C`.
    fn uniform_start(&self) -> Vec<f64> {
        let level = 1.0 - self.budget / self.total_cost();
        vec![level.clamp(0.0, 1.0); self.matrix.n()]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Gradient,
    VertexSearch,
    GridFallback,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizationResult {
    pub eta_star: Strategy,
    pub value: f64,
    pub method: Method,
    pub iterations: u64,
    pub certificate_used: Classification,
    pub cost_model: String,
    pub cost: f64,
    pub budget: f64,
    /// Projected-gradient norm reached the tolerance (always true for
    /// exhaustive vertex search).
    pub converged: bool,
    /// The method guarantees a global minimum for this instance.
    pub optimality_claimed: bool,
    /// A gradient was taken from a jittered matrix at a non-simple point.
    pub jitter_used: bool,
}

/// `∂R_e/∂η_j = (φᵀK)_j v_j / (φᵀv)` with `v`, `φ` the right and left Perron
/// vectors of `K Diag(η)`.
pub fn re_gradient(m: &NextGenMatrix, eta: &Strategy) -> Result<Vec<f64>> {
    if eta.len() != m.n() {
        return Err(Error::DimensionMismatch {
            what: "strategy",
            expected: m.n(),
            found: eta.len(),
        });
    }
    gradient_at(m.entries(), eta.as_slice())
}

fn gradient_at(k: &DenseMatrix, eta: &[f64]) -> Result<Vec<f64>> {
    let a = k.scale_columns(eta);
    let spec = spectrum_of(
        &a,
        &SpectrumOptions {
            verify_residuals: false,
            ..SpectrumOptions::default()
        },
    )?;
    let r = spec.radius();
    let multiplicity = spec.multiplicity_near(r.into());
    if multiplicity != 1 {
        return Err(Error::NotSimple { multiplicity });
    }
    let pair = perron_pair_of(&a)?;
    let (v, phi) = (&pair.right, &pair.left);
    let phi_k = k.vec_mul(phi);
    let norm: f64 = phi.iter().zip(v).map(|(p, x)| p * x).sum();
    if !(norm > 0.0) {
        return Err(Error::NotSimple { multiplicity: 0 });
    }
    Ok(phi_k.iter().zip(v).map(|(pk, x)| pk * x / norm).collect())
}

/// Gradient, or the gradient of a slightly perturbed positive matrix where
/// `R_e` is not differentiable. The flag reports the fallback.
fn gradient_or_jitter(k: &DenseMatrix, eta: &[f64]) -> Result<(Vec<f64>, bool)> {
    match gradient_at(k, eta) {
        Ok(g) => Ok((g, false)),
        Err(Error::NotSimple { .. } | Error::QuasiNilpotent { .. }) => {
            let eps = JITTER * k.max_abs().max(1.0);
            let jittered = DenseMatrix::from_fn(k.n(), |i, j| k[(i, j)] + eps);
            let eta: Vec<f64> = eta.iter().map(|e| e + JITTER).collect();
            Ok((gradient_at(&jittered, &eta)?, true))
        }
        Err(e) => Err(e),
    }
}

struct Descent {
    eta: Vec<f64>,
    value: f64,
    iterations: u64,
    converged: bool,
    jitter_used: bool,
}

/// Projected gradient with step halving; only strict decreases are
/// accepted, so the objective is monotone along the run.
fn projected_gradient(p: &BudgetProblem, start: Vec<f64>, max_iter: u64) -> Result<Descent> {
    let m = p.matrix();
    let mut eta = p.project(&start);
    let mut value = re_value(m, &eta)?;
    let mut step = 1.0;
    let mut jitter_used = false;
    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iter {
        iterations += 1;
        let (g, jittered) = gradient_or_jitter(m.entries(), &eta)?;
        jitter_used |= jittered;
        let unit: Vec<f64> = eta.iter().zip(&g).map(|(e, g)| e - g).collect();
        let pg = p.project(&unit).iter().zip(&eta).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        if pg <= GRADIENT_TOL {
            converged = true;
            break;
        }
        let mut accepted = false;
        while step > 1e-14 {
            let trial: Vec<f64> = eta.iter().zip(&g).map(|(e, g)| e - step * g).collect();
            let trial = p.project(&trial);
            let moved: f64 = trial.iter().zip(&eta).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            if moved == 0.0 {
                break;
            }
            let v = re_value(m, &trial)?;
            if v < value {
                eta = trial;
                value = v;
                accepted = true;
                step *= 2.0;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            // no strict decrease is representable: stationary to working precision
            converged = pg <= GRADIENT_TOL.sqrt();
            break;
        }
    }
    Ok(Descent {
        eta,
        value,
        iterations,
        converged,
        jitter_used,
    })
}

/// Candidate extreme points over the coordinates in `active`: each subset
/// `S` that fits the budget is fully vaccinated, and the remaining budget
/// goes to one coordinate it cannot cover. Dominated points (where a whole
/// further coordinate would still fit) are skipped because `R_e` is
/// monotone.
fn vertex_candidates(p: &BudgetProblem, active: &[usize]) -> Vec<Vec<f64>> {
    let n = p.matrix().n();
    let c = p.cost_weights();
    let k = active.len();
    let mut out = Vec::new();
    for mask in 0u64..(1u64 << k) {
        let spent: f64 = (0..k).filter(|b| mask >> b & 1 == 1).map(|b| c[active[b]]).sum();
        if spent > p.budget() + FEASIBILITY_TOL {
            continue;
        }
        let mut base = vec![1.0; n];
        (0..k).filter(|b| mask >> b & 1 == 1).for_each(|b| base[active[b]] = 0.0);
        let remaining = (p.budget() - spent).max(0.0);
        if mask == (1u64 << k) - 1 {
            out.push(base);
            continue;
        }
        for b in (0..k).filter(|b| mask >> b & 1 == 0) {
            let j = active[b];
            if c[j] > remaining {
                let mut eta = base.clone();
                eta[j] = 1.0 - remaining / c[j];
                out.push(eta);
            }
        }
    }
    out
}

fn best_of(candidates: Vec<(f64, usize, Vec<f64>)>) -> Option<(f64, usize, Vec<f64>)> {
    candidates
        .into_iter()
        .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)))
}

pub fn minimize_re(p: &BudgetProblem, verdict: &ShapeVerdict, max_iter: u64, seed: u64) -> Result<OptimizationResult> {
    let m = p.matrix();
    let n = m.n();
    let classification = verdict.classification;
    let finish = |eta: Vec<f64>, method: Method, iterations: u64, converged: bool, optimal: bool, jitter: bool| {
        let eta = Strategy::clamped(eta);
        let value = re_value(m, eta.as_slice())?;
        Ok(OptimizationResult {
            cost: p.cost(eta.as_slice()),
            eta_star: eta,
            value,
            method,
            iterations,
            certificate_used: classification,
            cost_model: COST_MODEL.to_string(),
            budget: p.budget(),
            converged,
            optimality_claimed: optimal,
            jitter_used: jitter,
        })
    };

    let convex = matches!(classification, Classification::ConvexCertified);
    let concave = matches!(classification, Classification::ConcaveCertified | Classification::LinearCertified);
    let default_method = if convex {
        Method::Gradient
    } else if concave {
        Method::VertexSearch
    } else {
        Method::GridFallback
    };
    if p.budget() <= 0.0 {
        return finish(vec![1.0; n], default_method, 0, true, true, false);
    }
    if p.budget() >= p.total_cost() {
        return finish(vec![0.0; n], default_method, 0, true, true, false);
    }

    if convex {
        let d = projected_gradient(p, p.uniform_start(), max_iter)?;
        return finish(d.eta, Method::Gradient, d.iterations, d.converged, d.converged, d.jitter_used);
    }

    if concave {
        // coordinates outside the non-zero atoms do not affect R_e
        let dec = atomic_decomposition(m)?;
        let mut active: Vec<usize> = dec.nonzero_atoms.iter().flatten().copied().collect();
        active.sort_unstable();
        if active.len() <= MAX_VERTEX_DIM {
            let candidates = vertex_candidates(p, &active);
            let count = candidates.len() as u64;
            let scored: Vec<(f64, usize, Vec<f64>)> = candidates
                .into_par_iter()
                .enumerate()
                .map(|(i, eta)| re_value(m, &eta).map(|v| (v, i, eta)))
                .collect::<Result<_>>()?;
            let eta = match best_of(scored) {
                Some((_, _, eta)) => eta,
                None => vec![1.0; n],
            };
            return finish(eta, Method::VertexSearch, count, true, true, false);
        }
    }

    let starts: Vec<Vec<f64>> = (0..MULTI_STARTS)
        .map(|s| {
            if s == 0 {
                p.uniform_start()
            } else {
                let mut rng = trial_rng(seed, s);
                let y: Vec<f64> = (0..n).map(|_| rng.gen::<f64>()).collect();
                p.project(&y)
            }
        })
        .collect();
    let runs: Vec<Descent> = starts
        .into_par_iter()
        .map(|s| projected_gradient(p, s, max_iter))
        .collect::<Result<_>>()?;
    let iterations = runs.iter().map(|d| d.iterations).sum();
    let jitter = runs.iter().any(|d| d.jitter_used);
    let (_, idx, eta) = best_of(runs.iter().enumerate().map(|(i, d)| (d.value, i, d.eta.clone())).collect())
        .expect("at least one start");
    finish(eta, Method::GridFallback, iterations, runs[idx].converged, false, jitter)
}
