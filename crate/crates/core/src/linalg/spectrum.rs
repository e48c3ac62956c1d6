use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::dense::DenseMatrix;
use super::eigen::{self, relative_residual};
use crate::error::{Error, Result};

/// Relative cluster radius: eigenvalues closer than `1e-7 · max(1, ρ)` merge.
pub const DEFAULT_CLUSTER_REL: f64 = 1e-7;
/// Relative zero band used by [`inertia`] defaults: `1e-9 · max(1, ρ)`.
pub const DEFAULT_ZERO_BAND_REL: f64 = 1e-9;
/// QR sweeps allowed per unit of dimension.
pub const DEFAULT_SWEEPS_PER_DIM: usize = 100;
pub const DEFAULT_RESIDUAL_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Eigenvalue {
    pub value: Complex64,
    pub multiplicity: usize,
}

/// Clustered multiset of eigenvalues.
///
/// Ordered by decreasing modulus, then decreasing real part, then decreasing
/// imaginary part. Conjugate clusters carry exactly conjugate values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    pub eigenvalues: Vec<Eigenvalue>,
    pub dimension: usize,
    pub cluster_radius: f64,
    /// Largest relative eigenpair residual, when residuals were checked.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub max_residual: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Inertia {
    pub positive_count: usize,
    pub negative_count: usize,
    pub zero_count: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectrumOptions {
    pub residual_tol: f64,
    /// Absolute cluster radius; `None` means `1e-7 · max(1, ρ)`.
    pub cluster_radius: Option<f64>,
    pub sweeps_per_dim: usize,
    pub verify_residuals: bool,
}

impl Default for SpectrumOptions {
    fn default() -> Self {
        Self {
            residual_tol: DEFAULT_RESIDUAL_TOL,
            cluster_radius: None,
            sweeps_per_dim: DEFAULT_SWEEPS_PER_DIM,
            verify_residuals: true,
        }
    }
}

impl SpectrumOptions {
    pub fn with_tol(tol: f64) -> Self {
        Self {
            residual_tol: tol,
            ..Self::default()
        }
    }
}

impl Spectrum {
    /// `rad(spec)`: largest modulus among the listed values (0 when empty).
    pub fn radius(&self) -> f64 {
        self.eigenvalues.iter().map(|e| e.value.norm()).fold(0.0, f64::max)
    }

    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    pub fn multiplicity_sum(&self) -> usize {
        self.eigenvalues.iter().map(|e| e.multiplicity).sum()
    }

    /// Clustered multiplicity of the eigenvalues within `cluster_radius` of `z`.
    pub fn multiplicity_near(&self, z: Complex64) -> usize {
        self.eigenvalues
            .iter()
            .filter(|e| (e.value - z).norm() <= self.cluster_radius)
            .map(|e| e.multiplicity)
            .sum()
    }

    /// Largest absolute imaginary part over the listed values.
    pub fn max_imag(&self) -> f64 {
        self.eigenvalues.iter().map(|e| e.value.im.abs()).fold(0.0, f64::max)
    }

    /// Expands multiplicities into a flat list (same order).
    pub fn flatten(&self) -> Vec<Complex64> {
        self.eigenvalues
            .iter()
            .flat_map(|e| std::iter::repeat(e.value).take(e.multiplicity))
            .collect()
    }

    /// Multiset equality up to `tol`, by greedy matching of flattened values.
    pub fn approx_eq(&self, other: &Spectrum, tol: f64) -> bool {
        multiset_close(&self.flatten(), &other.flatten(), tol)
    }

    /// Default zero band for inertia counts.
    pub fn default_zero_band(&self) -> f64 {
        DEFAULT_ZERO_BAND_REL * self.radius().max(1.0)
    }
}

/// Greedy nearest matching; adequate for well-separated clusters.
pub fn multiset_close(a: &[Complex64], b: &[Complex64], tol: f64) -> bool {
    if a.len() != b.len() {
        return false;
    }
    let mut used = vec![false; b.len()];
    for x in a {
        let best = b
            .iter()
            .enumerate()
            .filter(|(j, _)| !used[*j])
            .map(|(j, y)| (j, (x - y).norm()))
            .min_by(|l, r| l.1.total_cmp(&r.1));
        match best {
            Some((j, d)) if d <= tol => used[j] = true,
            _ => return false,
        }
    }
    true
}

fn order(a: &Complex64, b: &Complex64) -> std::cmp::Ordering {
    b.norm()
        .total_cmp(&a.norm())
        .then(b.re.total_cmp(&a.re))
        .then(b.im.total_cmp(&a.im))
}

/// Single-linkage clustering of raw eigenvalues, repeated on the cluster means
/// until no two representatives lie within `radius`.
pub fn cluster(raw: &[Complex64], radius: f64) -> Vec<Eigenvalue> {
    let mut groups: Vec<(Complex64, usize)> = raw.iter().map(|&z| (z, 1)).collect();
    loop {
        let k = groups.len();
        let mut parent: Vec<usize> = (0..k).collect();
        fn find(p: &mut [usize], mut i: usize) -> usize {
            while p[i] != i {
                p[i] = p[p[i]];
                i = p[i];
            }
            i
        }
        let mut merged = false;
        for i in 0..k {
            for j in i + 1..k {
                if (groups[i].0 - groups[j].0).norm() <= radius {
                    let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                    if ri != rj {
                        parent[rj] = ri;
                        merged = true;
                    }
                }
            }
        }
        if !merged {
            break;
        }
        let mut sums: Vec<(f64, f64, usize)> = vec![(0.0, 0.0, 0); k];
        for i in 0..k {
            let r = find(&mut parent, i);
            let (z, m) = groups[i];
            sums[r].0 += z.re * m as f64;
            sums[r].1 += z.im * m as f64;
            sums[r].2 += m;
        }
        groups = sums
            .into_iter()
            .filter(|s| s.2 > 0)
            .map(|(re, im, m)| (Complex64::new(re / m as f64, im / m as f64), m))
            .collect();
    }

    let mut out: Vec<Eigenvalue> = groups
        .into_iter()
        .map(|(mut z, m)| {
            if z.im.abs() <= 0.5 * radius {
                z.im = 0.0;
            }
            Eigenvalue {
                value: z,
                multiplicity: m,
            }
        })
        .collect();

    // Pin conjugate partners to exact conjugates of the upper half-plane value.
    let uppers: Vec<Complex64> = out.iter().filter(|e| e.value.im > 0.0).map(|e| e.value).collect();
    for up in uppers {
        let target = up.conj();
        if let Some(low) = out
            .iter_mut()
            .filter(|e| e.value.im < 0.0)
            .min_by(|a, b| (a.value - target).norm().total_cmp(&(b.value - target).norm()))
        {
            low.value = target;
        }
    }
    out.sort_by(|a, b| order(&a.value, &b.value));
    out
}

fn validate(m: &DenseMatrix) -> Result<()> {
    if m.n() == 0 {
        return Err(Error::InvalidInput("matrix must have dimension at least 1".into()));
    }
    if let Some(pos) = m.as_slice().iter().position(|x| !x.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "non-finite entry at ({}, {})",
            pos / m.n(),
            pos % m.n()
        )));
    }
    Ok(())
}

/// Clustered spectrum of a dense real matrix.
pub fn spectrum_of(m: &DenseMatrix, opts: &SpectrumOptions) -> Result<Spectrum> {
    validate(m)?;
    if !(opts.residual_tol > 0.0) {
        return Err(Error::InvalidInput("residual tolerance must be positive".into()));
    }
    let reduction = eigen::reduce(m, opts.sweeps_per_dim, opts.verify_residuals)?;
    let raw_radius = reduction.values.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let radius = opts
        .cluster_radius
        .unwrap_or(DEFAULT_CLUSTER_REL * raw_radius.max(1.0));
    let eigenvalues = cluster(&reduction.values, radius);

    let max_residual = if opts.verify_residuals {
        let mut worst = 0.0f64;
        for e in &eigenvalues {
            let v = reduction.eigenvector(e.value);
            let res = relative_residual(m, e.value, &v);
            if !(res <= opts.residual_tol) {
                return Err(Error::ResidualTooLarge {
                    eigenvalue: e.value,
                    residual: res,
                    tol: opts.residual_tol,
                });
            }
            worst = worst.max(res);
        }
        Some(worst)
    } else {
        None
    };

    Ok(Spectrum {
        eigenvalues,
        dimension: m.n(),
        cluster_radius: radius,
        max_residual,
    })
}

/// `rad(spectrum)` without the residual verification pass. The clustered
/// values, and hence the radius, are identical to [`spectrum_of`].
pub fn spectral_radius_of(m: &DenseMatrix) -> Result<f64> {
    let opts = SpectrumOptions {
        verify_residuals: false,
        ..SpectrumOptions::default()
    };
    Ok(spectrum_of(m, &opts)?.radius())
}

/// Counts multiplicities with real part above `zero_band` as positive and
/// below `-zero_band` as negative.
pub fn inertia(s: &Spectrum, zero_band: f64) -> Result<Inertia> {
    if !(zero_band >= 0.0) {
        return Err(Error::InvalidInput("zero band must be nonnegative".into()));
    }
    let mut out = Inertia {
        positive_count: 0,
        negative_count: 0,
        zero_count: 0,
    };
    for e in &s.eigenvalues {
        if e.value.re > zero_band {
            out.positive_count += e.multiplicity;
        } else if e.value.re < -zero_band {
            out.negative_count += e.multiplicity;
        } else {
            out.zero_count += e.multiplicity;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn clustering_merges_and_orders() {
        let raw = [c(1.0, 0.0), c(1.0 + 1e-9, 0.0), c(-2.0, 0.0), c(0.5, 0.3), c(0.5, -0.3)];
        let out = cluster(&raw, 1e-7);
        assert_eq!(out.len(), 4);
        assert_eq!(out[0].value, c(-2.0, 0.0));
        assert_eq!(out[1].multiplicity, 2);
        assert_eq!(out[2].value, out[3].value.conj());
    }

    #[test]
    fn near_real_pair_collapses_onto_axis() {
        let out = cluster(&[c(3.0, 1e-10), c(3.0, -1e-10)], 1e-7);
        assert_eq!(out, vec![Eigenvalue { value: c(3.0, 0.0), multiplicity: 2 }]);
    }

    #[test]
    fn identity_has_double_one() {
        let s = spectrum_of(&DenseMatrix::identity(2), &SpectrumOptions::default()).unwrap();
        assert_eq!(s.eigenvalues, vec![Eigenvalue { value: c(1.0, 0.0), multiplicity: 2 }]);
    }

    #[test]
    fn antidiagonal_hand_spectrum() {
        let m = DenseMatrix::from_rows(&[[0.0, 2.0], [8.0, 0.0]]);
        let s = spectrum_of(&m, &SpectrumOptions::default()).unwrap();
        assert_eq!(s.len(), 2);
        assert!((s.eigenvalues[0].value - c(4.0, 0.0)).norm() < 1e-12);
        assert!((s.eigenvalues[1].value - c(-4.0, 0.0)).norm() < 1e-12);
        assert!((spectral_radius_of(&m).unwrap() - 4.0).abs() < 1e-12);
    }

    #[test]
    fn inertia_of_zero_matrix() {
        let s = spectrum_of(&DenseMatrix::zeros(4), &SpectrumOptions::default()).unwrap();
        assert_eq!(
            inertia(&s, s.default_zero_band()).unwrap(),
            Inertia { positive_count: 0, negative_count: 0, zero_count: 4 }
        );
        assert_eq!(s.radius(), 0.0);
    }

    #[test]
    fn rejects_non_finite_and_bad_tol() {
        let bad = DenseMatrix::from_rows(&[[1.0, f64::NAN], [0.0, 1.0]]);
        assert!(matches!(spectrum_of(&bad, &SpectrumOptions::default()), Err(Error::InvalidInput(_))));
        let ok = DenseMatrix::identity(2);
        assert!(spectrum_of(&ok, &SpectrumOptions::with_tol(0.0)).is_err());
        assert!(inertia(&spectrum_of(&ok, &SpectrumOptions::default()).unwrap(), -1.0).is_err());
    }
}
