//! Frobenius decomposition: strongly connected components of the support
//! digraph (edge `j → i` when `K_ij > 0`), listed so that edges only run
//! from earlier to later components.
//!
//! A component is a non-zero atom when its diagonal block has positive
//! spectral radius, which for a strongly connected block means it has at
//! least two indices or a positive self-loop. `R_e` is the maximum of the
//! per-atom reproduction numbers.

use std::collections::VecDeque;

use num_complex::Complex64;
use petgraph::algo::tarjan_scc;
use petgraph::graph::DiGraph;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{cluster, spectral_radius_of, spectrum_of, DenseMatrix, SpectrumOptions};
use crate::matrix::{NextGenMatrix, Strategy};
use crate::re::{r0, re_value};
use crate::symmetrize::{support_threshold, DEFAULT_SUPPORT_TOL};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AtomDecomposition {
    pub n: usize,
    /// Strongly connected components in topological order, each sorted.
    pub components: Vec<Vec<usize>>,
    /// Components with positive block spectral radius, in the same order.
    pub nonzero_atoms: Vec<Vec<usize>>,
    /// Spectral radius of each non-zero atom's diagonal block.
    pub block_radii: Vec<f64>,
    /// Union of the zero atoms, sorted.
    pub residual: Vec<usize>,
}

impl AtomDecomposition {
    /// The diagonal block of atom `i`, kept at full dimension (zeros outside
    /// `atom × atom`).
    pub fn restricted(&self, m: &NextGenMatrix, i: usize) -> Result<AtomRestrictedMatrix> {
        let atom = self.nonzero_atoms[i].clone();
        let mut inside = vec![false; m.n()];
        atom.iter().for_each(|&a| inside[a] = true);
        let block = m.map_entries(DenseMatrix::from_fn(m.n(), |r, c| {
            if inside[r] && inside[c] {
                m.get(r, c)
            } else {
                0.0
            }
        }))?;
        Ok(AtomRestrictedMatrix { atom, block })
    }

    /// Sum of all atom blocks: every cross-atom entry set to zero.
    pub fn atom_sum(&self, m: &NextGenMatrix) -> Result<NextGenMatrix> {
        let mut owner = vec![usize::MAX; m.n()];
        for (k, atom) in self.nonzero_atoms.iter().enumerate() {
            atom.iter().for_each(|&a| owner[a] = k);
        }
        m.map_entries(DenseMatrix::from_fn(m.n(), |r, c| {
            if owner[r] != usize::MAX && owner[r] == owner[c] {
                m.get(r, c)
            } else {
                0.0
            }
        }))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AtomRestrictedMatrix {
    pub atom: Vec<usize>,
    pub block: NextGenMatrix,
}

fn support_graph(m: &NextGenMatrix) -> DiGraph<(), ()> {
    let n = m.n();
    let thr = support_threshold(m, DEFAULT_SUPPORT_TOL);
    let mut g = DiGraph::with_capacity(n, 0);
    let nodes: Vec<_> = (0..n).map(|_| g.add_node(())).collect();
    for i in 0..n {
        for j in 0..n {
            if i != j && m.get(i, j) > thr {
                g.add_edge(nodes[j], nodes[i], ());
            }
        }
    }
    g
}

pub fn atomic_decomposition(m: &NextGenMatrix) -> Result<AtomDecomposition> {
    let n = m.n();
    let thr = support_threshold(m, DEFAULT_SUPPORT_TOL);
    let graph = support_graph(m);
    // tarjan_scc yields components in reverse topological order
    let mut components: Vec<Vec<usize>> = tarjan_scc(&graph)
        .into_iter()
        .map(|c| {
            let mut c: Vec<usize> = c.into_iter().map(|v| v.index()).collect();
            c.sort_unstable();
            c
        })
        .collect();
    components.reverse();

    let mut nonzero_atoms = Vec::new();
    let mut block_radii = Vec::new();
    let mut residual = Vec::new();
    for c in &components {
        let nonzero = c.len() >= 2 || m.get(c[0], c[0]) > thr;
        if nonzero {
            block_radii.push(spectral_radius_of(&m.entries().submatrix(c))?);
            nonzero_atoms.push(c.clone());
        } else {
            residual.extend_from_slice(c);
        }
    }
    residual.sort_unstable();
    Ok(AtomDecomposition {
        n,
        components,
        nonzero_atoms,
        block_radii,
        residual,
    })
}

fn block_re(m: &NextGenMatrix, atom: &[usize], eta: &[f64]) -> Result<f64> {
    let sub_eta: Vec<f64> = atom.iter().map(|&i| eta[i]).collect();
    spectral_radius_of(&m.entries().submatrix(atom).scale_columns(&sub_eta))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AtomRe {
    pub value: f64,
    /// Index into `nonzero_atoms` of the first atom attaining the maximum.
    pub argmax_atom: Option<usize>,
    pub per_atom: Vec<f64>,
}

/// `R_e(η) = max_i R_e[K_i](η)` over the non-zero atoms, with `max ∅ = 0`.
pub fn re_via_atoms(m: &NextGenMatrix, eta: &Strategy) -> Result<AtomRe> {
    if eta.len() != m.n() {
        return Err(Error::DimensionMismatch {
            what: "strategy",
            expected: m.n(),
            found: eta.len(),
        });
    }
    let dec = atomic_decomposition(m)?;
    re_via_decomposition(m, &dec, eta.as_slice())
}

pub fn re_via_decomposition(m: &NextGenMatrix, dec: &AtomDecomposition, eta: &[f64]) -> Result<AtomRe> {
    let per_atom = dec
        .nonzero_atoms
        .iter()
        .map(|a| block_re(m, a, eta))
        .collect::<Result<Vec<f64>>>()?;
    let mut best: Option<(usize, f64)> = None;
    for (k, &v) in per_atom.iter().enumerate() {
        if best.map_or(true, |(_, b)| v > b) {
            best = Some((k, v));
        }
    }
    Ok(AtomRe {
        value: best.map_or(0.0, |(_, v)| v),
        argmax_atom: best.map(|(k, _)| k),
        per_atom,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiplicityEntry {
    pub value: Complex64,
    pub full_multiplicity: usize,
    pub atom_multiplicity: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiplicityReport {
    pub cluster_radius: f64,
    pub entries: Vec<MultiplicityEntry>,
    pub mismatches: Vec<MultiplicityEntry>,
}

impl MultiplicityReport {
    pub fn passed(&self) -> bool {
        self.mismatches.is_empty()
    }
}

fn raw_eigenvalues(a: &DenseMatrix) -> Result<Vec<Complex64>> {
    let opts = SpectrumOptions {
        verify_residuals: false,
        cluster_radius: Some(0.0),
        ..SpectrumOptions::default()
    };
    Ok(spectrum_of(a, &opts)?.flatten())
}

/// For every non-zero eigenvalue cluster of `K·Diag(η)`, compares its
/// multiplicity with the summed multiplicities of the atom blocks' eigenvalues
/// in the same cluster.
pub fn multiplicity_sum_check(m: &NextGenMatrix, eta: &Strategy) -> Result<MultiplicityReport> {
    let eta = eta.as_slice();
    let dec = atomic_decomposition(m)?;
    let full_raw = raw_eigenvalues(&m.column_scaled(eta))?;
    let rho = full_raw.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let radius = crate::linalg::spectrum::DEFAULT_CLUSTER_REL * rho.max(1.0);

    let mut atom_raw = Vec::new();
    for a in &dec.nonzero_atoms {
        let sub_eta: Vec<f64> = a.iter().map(|&i| eta[i]).collect();
        atom_raw.extend(raw_eigenvalues(&m.entries().submatrix(a).scale_columns(&sub_eta))?);
    }
    let full = cluster(&full_raw, radius);
    let atoms = cluster(&atom_raw, radius);
    let count_near = |list: &[crate::linalg::Eigenvalue], z: Complex64| -> usize {
        list.iter()
            .filter(|e| (e.value - z).norm() <= radius)
            .map(|e| e.multiplicity)
            .sum()
    };

    let mut entries = Vec::new();
    for e in full.iter().filter(|e| e.value.norm() > radius) {
        entries.push(MultiplicityEntry {
            value: e.value,
            full_multiplicity: e.multiplicity,
            atom_multiplicity: count_near(&atoms, e.value),
        });
    }
    for e in atoms.iter().filter(|e| e.value.norm() > radius) {
        if count_near(&full, e.value) == 0 {
            entries.push(MultiplicityEntry {
                value: e.value,
                full_multiplicity: 0,
                atom_multiplicity: e.multiplicity,
            });
        }
    }
    let mismatches = entries
        .iter()
        .filter(|e| e.full_multiplicity != e.atom_multiplicity)
        .cloned()
        .collect();
    Ok(MultiplicityReport {
        cluster_radius: radius,
        entries,
        mismatches,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonatomicEvidence {
    pub monatomic: bool,
    pub atom_count: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub atom: Option<Vec<usize>>,
    pub r0: f64,
    /// Clustered multiplicity of `R_0` in the spectrum of `K` (when `R_0 > 0`).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r0_multiplicity: Option<usize>,
    /// Indices reachable from the unique atom along the support digraph.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reachable: Option<Vec<usize>>,
}

impl MonatomicEvidence {
    pub fn r0_simple(&self) -> Option<bool> {
        self.r0_multiplicity.map(|k| k == 1)
    }
}

pub fn is_monatomic(m: &NextGenMatrix) -> Result<MonatomicEvidence> {
    let dec = atomic_decomposition(m)?;
    let spec = spectrum_of(
        m.entries(),
        &SpectrumOptions {
            verify_residuals: false,
            ..SpectrumOptions::default()
        },
    )?;
    let r0 = spec.radius();
    let r0_multiplicity = (r0 > spec.cluster_radius).then(|| spec.multiplicity_near(Complex64::new(r0, 0.0)));
    let monatomic = dec.nonzero_atoms.len() == 1;
    let (atom, reachable) = if monatomic {
        let atom = dec.nonzero_atoms[0].clone();
        let reach = reachable_from(m, &atom);
        (Some(atom), Some(reach))
    } else {
        (None, None)
    };
    Ok(MonatomicEvidence {
        monatomic,
        atom_count: dec.nonzero_atoms.len(),
        atom,
        r0,
        r0_multiplicity,
        reachable,
    })
}

fn reachable_from(m: &NextGenMatrix, start: &[usize]) -> Vec<usize> {
    let n = m.n();
    let thr = support_threshold(m, DEFAULT_SUPPORT_TOL);
    let mut seen = vec![false; n];
    let mut queue: VecDeque<usize> = start.iter().copied().collect();
    start.iter().for_each(|&s| seen[s] = true);
    while let Some(j) = queue.pop_front() {
        for i in 0..n {
            if !seen[i] && m.get(i, j) > thr {
                seen[i] = true;
                queue.push_back(i);
            }
        }
    }
    (0..n).filter(|&i| seen[i]).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConcavityWitness {
    /// Atom supporting `eta1` (smaller block radius).
    pub first_atom: Vec<usize>,
    /// Atom supporting `eta2` (largest block radius).
    pub second_atom: Vec<usize>,
    pub eta1: Vec<f64>,
    pub eta2: Vec<f64>,
    pub theta: f64,
    pub re_eta1: f64,
    pub re_eta2: f64,
    pub re_mid: f64,
    /// `θ R_e(η₁) + (1−θ) R_e(η₂) − R_e(θη₁ + (1−θ)η₂)`, positive for a violation.
    pub gap: f64,
    pub margin: f64,
}

impl ConcavityWitness {
    /// Re-evaluates the three reproduction numbers and returns the gap.
    pub fn replay(&self, m: &NextGenMatrix) -> Result<f64> {
        let mid: Vec<f64> = self
            .eta1
            .iter()
            .zip(&self.eta2)
            .map(|(a, b)| self.theta * a + (1.0 - self.theta) * b)
            .collect();
        let chord = self.theta * re_value(m, &self.eta1)? + (1.0 - self.theta) * re_value(m, &self.eta2)?;
        Ok(chord - re_value(m, &mid)?)
    }
}

/// For an operator with at least two non-zero atoms, builds the explicit
/// pair `η₁ = 1_{Ω₁}`, `η₂ = (R₀[K₁]/R₀[K₂]) 1_{Ω₂}` on which `R_e` is not
/// concave: both ends evaluate to `R₀[K₁]` while the midpoint gives half of it.
pub fn concavity_implies_monatomic_witness(m: &NextGenMatrix) -> Result<Option<ConcavityWitness>> {
    let dec = atomic_decomposition(m)?;
    let r0 = r0(m)?;
    if dec.nonzero_atoms.is_empty() {
        return Err(Error::Precondition("operator is quasi-nilpotent (no non-zero atom)".into()));
    }
    if dec.nonzero_atoms.len() == 1 {
        return Err(Error::Precondition("operator is monatomic".into()));
    }
    let by_radius = |skip: Option<usize>| {
        let mut best: Option<usize> = None;
        for (k, &r) in dec.block_radii.iter().enumerate() {
            if Some(k) == skip {
                continue;
            }
            if best.map_or(true, |b| r > dec.block_radii[b]) {
                best = Some(k);
            }
        }
        best.expect("at least two atoms")
    };
    let second = by_radius(None);
    let first = by_radius(Some(second));
    let (r1, r2) = (dec.block_radii[first], dec.block_radii[second]);
    let n = m.n();
    let eta1 = Strategy::indicator(n, &dec.nonzero_atoms[first]).into_vec();
    let mut eta2 = vec![0.0; n];
    dec.nonzero_atoms[second].iter().for_each(|&i| eta2[i] = r1 / r2);

    let theta = 0.5;
    let mid: Vec<f64> = eta1.iter().zip(&eta2).map(|(a, b)| theta * a + (1.0 - theta) * b).collect();
    let re_eta1 = re_value(m, &eta1)?;
    let re_eta2 = re_value(m, &eta2)?;
    let re_mid = re_value(m, &mid)?;
    let gap = theta * re_eta1 + (1.0 - theta) * re_eta2 - re_mid;
    let margin = 1e-7 * (1.0 + r0);
    if gap <= margin {
        return Ok(None);
    }
    Ok(Some(ConcavityWitness {
        first_atom: dec.nonzero_atoms[first].clone(),
        second_atom: dec.nonzero_atoms[second].clone(),
        eta1,
        eta2,
        theta,
        re_eta1,
        re_eta2,
        re_mid,
        gap,
        margin,
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::re::re;

    fn m(rows: &[[f64; 2]]) -> NextGenMatrix {
        NextGenMatrix::from_rows(rows).unwrap()
    }

    #[test]
    fn disjoint_self_loops_are_two_atoms() {
        let d = atomic_decomposition(&m(&[[2.0, 0.0], [0.0, 3.0]])).unwrap();
        assert_eq!(d.nonzero_atoms.len(), 2);
        assert!(d.residual.is_empty());
        let mut atoms = d.nonzero_atoms.clone();
        atoms.sort();
        assert_eq!(atoms, vec![vec![0], vec![1]]);
    }

    #[test]
    fn nilpotent_has_no_atoms() {
        let mat = m(&[[0.0, 1.0], [0.0, 0.0]]);
        let d = atomic_decomposition(&mat).unwrap();
        assert!(d.nonzero_atoms.is_empty());
        assert_eq!(d.residual, vec![0, 1]);
        let r = re_via_atoms(&mat, &Strategy::ones(2)).unwrap();
        assert_eq!(r.value, 0.0);
        assert_eq!(r.argmax_atom, None);
    }

    #[test]
    fn triangular_atoms_and_topological_order() {
        let mat = m(&[[1.0, 1.0], [0.0, 2.0]]);
        let d = atomic_decomposition(&mat).unwrap();
        // edge 1 → 0, so {1} precedes {0}
        assert_eq!(d.components, vec![vec![1], vec![0]]);
        assert_eq!(d.nonzero_atoms, vec![vec![1], vec![0]]);
        assert!((d.block_radii[0] - 2.0).abs() < 1e-15 && (d.block_radii[1] - 1.0).abs() < 1e-15);

        let r = re_via_atoms(&mat, &Strategy::new(vec![1.0, 0.25]).unwrap()).unwrap();
        assert!((r.value - 1.0).abs() < 1e-15);
        assert_eq!(d.nonzero_atoms[r.argmax_atom.unwrap()], vec![0]);
    }

    #[test]
    fn irreducible_counterexample_is_single_atom() {
        let mat = fixtures::counter_convex();
        let r = re_via_atoms(&mat, &Strategy::ones(3)).unwrap();
        assert_eq!(r.per_atom.len(), 1);
        assert!((r.value - re(&mat, &Strategy::ones(3)).unwrap().value).abs() < 1e-10);
        let ev = is_monatomic(&mat).unwrap();
        assert!(ev.monatomic);
        assert_eq!(ev.r0_simple(), Some(true));
        assert_eq!(ev.reachable, Some(vec![0, 1, 2]));
    }

    #[test]
    fn monatomic_negatives() {
        assert!(!is_monatomic(&m(&[[1.0, 0.0], [0.0, 2.0]])).unwrap().monatomic);
        let ev = is_monatomic(&m(&[[0.0, 1.0], [0.0, 0.0]])).unwrap();
        assert!(!ev.monatomic);
        assert_eq!(ev.atom_count, 0);
    }

    #[test]
    fn tie_breaks_to_earliest_atom() {
        let mat = m(&[[3.0, 0.0], [0.0, 3.0]]);
        let r = re_via_atoms(&mat, &Strategy::ones(2)).unwrap();
        assert_eq!(r.argmax_atom, Some(0));
    }

    #[test]
    fn multiplicity_sums() {
        let b = [[1.0, 2.0], [3.0, 1.0]];
        let mut rows = vec![vec![0.0; 4]; 4];
        for i in 0..2 {
            for j in 0..2 {
                rows[i][j] = b[i][j];
                rows[i + 2][j + 2] = b[i][j];
            }
        }
        let mat = NextGenMatrix::from_rows(&rows).unwrap();
        let rep = multiplicity_sum_check(&mat, &Strategy::ones(4)).unwrap();
        assert!(rep.passed(), "{rep:?}");
        assert!(rep.entries.iter().all(|e| e.full_multiplicity == 2));

        let tri = m(&[[1.0, 1.0], [0.0, 2.0]]);
        let rep = multiplicity_sum_check(&tri, &Strategy::ones(2)).unwrap();
        assert!(rep.passed());
        assert_eq!(rep.entries.len(), 2);
    }

    #[test]
    fn concavity_witnesses_from_hand_examples() {
        let w = concavity_implies_monatomic_witness(&m(&[[1.0, 0.0], [0.0, 2.0]])).unwrap().unwrap();
        assert_eq!(w.eta1, vec![1.0, 0.0]);
        assert_eq!(w.eta2, vec![0.0, 0.5]);
        assert!((w.re_mid - 0.5).abs() < 1e-15);
        assert!((w.gap - 0.5).abs() < 1e-15);

        let w = concavity_implies_monatomic_witness(&m(&[[3.0, 0.0], [0.0, 3.0]])).unwrap().unwrap();
        assert_eq!((w.eta1.clone(), w.eta2.clone()), (vec![1.0, 0.0], vec![0.0, 1.0]));
        assert!((w.re_mid - 1.5).abs() < 1e-14 && (w.gap - 1.5).abs() < 1e-14);

        let tri = m(&[[1.0, 1.0], [0.0, 2.0]]);
        let w = concavity_implies_monatomic_witness(&tri).unwrap().unwrap();
        assert_eq!((w.eta1.clone(), w.eta2.clone()), (vec![1.0, 0.0], vec![0.0, 0.5]));
        assert!((w.re_mid - 0.5).abs() < 1e-15);
        assert!((w.replay(&tri).unwrap() - w.gap).abs() < 1e-12);
    }

    #[test]
    fn concavity_witness_preconditions() {
        assert!(concavity_implies_monatomic_witness(&fixtures::counter_convex()).is_err());
        assert!(concavity_implies_monatomic_witness(&m(&[[0.0, 1.0], [0.0, 0.0]])).is_err());
    }

    #[test]
    fn restricted_block_and_atom_sum() {
        let tri = m(&[[1.0, 1.0], [0.0, 2.0]]);
        let d = atomic_decomposition(&tri).unwrap();
        let blk = d.restricted(&tri, 1).unwrap();
        assert_eq!(blk.block.entries().to_rows(), vec![vec![1.0, 0.0], vec![0.0, 0.0]]);
        assert_eq!(d.atom_sum(&tri).unwrap().entries().to_rows(), vec![vec![1.0, 0.0], vec![0.0, 2.0]]);
    }
}
