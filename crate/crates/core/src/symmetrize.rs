//! Diagonal symmetrizability: find a positive diagonal `d` with
//! `d_i K_ij = d_j K_ji`, or a concrete reason none exists.
//!
//! The ratios `d_j / d_i = K_ij / K_ji` are propagated over a depth-first
//! spanning forest of the undirected support graph; every remaining edge
//! then closes a cycle whose ratio product must be one.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;
use crate::matrix::NextGenMatrix;

/// Entries at most `tol · max_entry` count as structural zeros.
pub const DEFAULT_SUPPORT_TOL: f64 = 1e-12;
/// Relative tolerance on cycle ratio products.
pub const DEFAULT_CYCLE_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymmetrizationCertificate {
    /// Positive diagonal, normalised to 1 at the smallest index of every
    /// connected component of the support graph.
    pub d: Vec<f64>,
    /// `max |d_i K_ij − d_j K_ji|`.
    pub residual: f64,
    /// Connected components of the undirected support graph.
    pub components: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ObstructionKind {
    ZeroPatternAsymmetry,
    CycleInconsistency,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymmetrizationObstruction {
    pub kind: ObstructionKind,
    /// `(i, j)` with `K_ij > 0 = K_ji`, or the cycle `c_0, …, c_{k-1}`.
    pub witness: Vec<usize>,
    /// `Π K_{c_t c_{t+1}} / K_{c_{t+1} c_t}` around the cycle.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub product: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "kebab-case")]
pub enum Symmetrization {
    Certified(SymmetrizationCertificate),
    Obstructed(SymmetrizationObstruction),
}

impl Symmetrization {
    pub fn certificate(&self) -> Option<&SymmetrizationCertificate> {
        match self {
            Symmetrization::Certified(c) => Some(c),
            Symmetrization::Obstructed(_) => None,
        }
    }

    pub fn is_certified(&self) -> bool {
        self.certificate().is_some()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymmetrizeOptions {
    pub support_tol: f64,
    pub cycle_tol: f64,
}

impl Default for SymmetrizeOptions {
    fn default() -> Self {
        Self {
            support_tol: DEFAULT_SUPPORT_TOL,
            cycle_tol: DEFAULT_CYCLE_TOL,
        }
    }
}

/// Support threshold shared with the atomic decomposition.
pub fn support_threshold(m: &NextGenMatrix, tol: f64) -> f64 {
    tol * m.max_entry()
}

/// Decides diagonal symmetrizability with the given support tolerance and
/// the default cycle tolerance.
pub fn symmetrize(m: &NextGenMatrix, tol: f64) -> Result<Symmetrization> {
    symmetrize_with(
        m,
        &SymmetrizeOptions {
            support_tol: tol,
            ..SymmetrizeOptions::default()
        },
    )
}

pub fn symmetrize_with(m: &NextGenMatrix, opts: &SymmetrizeOptions) -> Result<Symmetrization> {
    if !(opts.support_tol > 0.0) || !(opts.cycle_tol > 0.0) {
        return Err(Error::InvalidInput("tolerances must be positive".into()));
    }
    let n = m.n();
    let thr = support_threshold(m, opts.support_tol);
    let on = |i: usize, j: usize| m.get(i, j) > thr;

    for i in 0..n {
        for j in i + 1..n {
            match (on(i, j), on(j, i)) {
                (true, false) => return Ok(zero_pattern(i, j)),
                (false, true) => return Ok(zero_pattern(j, i)),
                _ => {}
            }
        }
    }

    let neighbours: Vec<Vec<usize>> = (0..n)
        .map(|i| (0..n).filter(|&j| j != i && on(i, j)).collect())
        .collect();

    let mut d = vec![0.0; n];
    let mut parent: Vec<Option<usize>> = vec![None; n];
    let mut visited = vec![false; n];
    let mut components = Vec::new();
    for root in 0..n {
        if visited[root] {
            continue;
        }
        let mut component = vec![root];
        visited[root] = true;
        d[root] = 1.0;
        let mut stack = vec![(root, 0usize)];
        while let Some(top) = stack.last_mut() {
            let node = top.0;
            if let Some(&nb) = neighbours[node].get(top.1) {
                top.1 += 1;
                if !visited[nb] {
                    visited[nb] = true;
                    parent[nb] = Some(node);
                    d[nb] = d[node] * m.get(node, nb) / m.get(nb, node);
                    component.push(nb);
                    stack.push((nb, 0));
                }
            } else {
                stack.pop();
            }
        }
        component.sort_unstable();
        components.push(component);
    }

    let mut residual = 0.0f64;
    for i in 0..n {
        for &j in &neighbours[i] {
            if j < i {
                continue;
            }
            let a = d[i] * m.get(i, j);
            let b = d[j] * m.get(j, i);
            if (a - b).abs() > opts.cycle_tol * a.max(b) {
                let cycle = closing_cycle(&parent, i, j);
                let product = cycle_product(m.entries(), &cycle);
                return Ok(Symmetrization::Obstructed(SymmetrizationObstruction {
                    kind: ObstructionKind::CycleInconsistency,
                    witness: cycle,
                    product: Some(product),
                }));
            }
        }
    }
    for i in 0..n {
        for j in 0..n {
            residual = residual.max((d[i] * m.get(i, j) - d[j] * m.get(j, i)).abs());
        }
    }
    Ok(Symmetrization::Certified(SymmetrizationCertificate {
        d,
        residual,
        components,
    }))
}

fn zero_pattern(i: usize, j: usize) -> Symmetrization {
    Symmetrization::Obstructed(SymmetrizationObstruction {
        kind: ObstructionKind::ZeroPatternAsymmetry,
        witness: vec![i, j],
        product: None,
    })
}

/// Tree path `i → lca → j`; the edge `j → i` closes it.
fn closing_cycle(parent: &[Option<usize>], i: usize, j: usize) -> Vec<usize> {
    let ancestors = |mut v: usize| {
        let mut path = vec![v];
        while let Some(p) = parent[v] {
            path.push(p);
            v = p;
        }
        path
    };
    let up_i = ancestors(i);
    let up_j = ancestors(j);
    let lca = *up_i
        .iter()
        .find(|v| up_j.contains(v))
        .expect("endpoints share a spanning tree");
    let mut cycle: Vec<usize> = up_i.iter().copied().take_while(|&v| v != lca).collect();
    cycle.push(lca);
    let tail: Vec<usize> = up_j.iter().copied().take_while(|&v| v != lca).collect();
    cycle.extend(tail.into_iter().rev());
    // Start the cycle at its smallest index, keeping orientation.
    let start = (0..cycle.len()).min_by_key(|&k| cycle[k]).unwrap_or(0);
    cycle.rotate_left(start);
    cycle
}

/// `Π K_{c_t, c_{t+1}} / K_{c_{t+1}, c_t}` with wrap-around.
pub fn cycle_product(k: &DenseMatrix, cycle: &[usize]) -> f64 {
    let len = cycle.len();
    (0..len)
        .map(|t| {
            let (a, b) = (cycle[t], cycle[(t + 1) % len]);
            k[(a, b)] / k[(b, a)]
        })
        .product()
}

/// `S_ij = √(d_i / d_j) · K_ij`, symmetric and similar to `K`.
pub fn symmetric_form(m: &NextGenMatrix, cert: &SymmetrizationCertificate) -> Result<DenseMatrix> {
    let n = m.n();
    if cert.d.len() != n {
        return Err(Error::DimensionMismatch {
            what: "certificate diagonal",
            expected: n,
            found: cert.d.len(),
        });
    }
    if cert.d.iter().any(|x| !(x.is_finite() && *x > 0.0)) {
        return Err(Error::InvalidInput("certificate diagonal must be positive".into()));
    }
    let sq: Vec<f64> = cert.d.iter().map(|x| x.sqrt()).collect();
    let raw = DenseMatrix::from_fn(n, |i, j| sq[i] / sq[j] * m.get(i, j));
    let scale = raw.max_abs();
    if !raw.is_symmetric(DEFAULT_CYCLE_TOL * scale.max(f64::MIN_POSITIVE)) {
        return Err(Error::Precondition("certificate does not symmetrise this matrix".into()));
    }
    Ok(DenseMatrix::from_fn(n, |i, j| 0.5 * (raw[(i, j)] + raw[(j, i)])))
}
