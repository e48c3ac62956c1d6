//! Dense real nonsymmetric eigenvalue solver.
//!
//! Pipeline: diagonal balancing (powers of two, no permutations), Householder
//! reduction to upper Hessenberg form with the orthogonal factor accumulated,
//! then the implicit Francis double-shift QR iteration. Eigenpair residuals
//! are checked by inverse iteration on the Hessenberg form, mapped back to the
//! original coordinates.

use num_complex::Complex64;

use super::dense::DenseMatrix;
use crate::error::{Error, PartialReduction, Result};

const RADIX: f64 = 2.0;

/// Similarity `D⁻¹ A D` that equalises row and column norms.
pub(crate) fn balance(a: &mut DenseMatrix) -> Vec<f64> {
    let n = a.n();
    let mut scale = vec![1.0; n];
    let sqrdx = RADIX * RADIX;
    loop {
        let mut done = true;
        for i in 0..n {
            let mut c = 0.0;
            let mut r = 0.0;
            for j in 0..n {
                if j != i {
                    c += a[(j, i)].abs();
                    r += a[(i, j)].abs();
                }
            }
            if c == 0.0 || r == 0.0 {
                continue;
            }
            let s = c + r;
            let mut f = 1.0;
            let mut g = r / RADIX;
            while c < g {
                f *= RADIX;
                c *= sqrdx;
            }
            g = r * RADIX;
            while c > g {
                f /= RADIX;
                c /= sqrdx;
            }
            if (c + r) / f < 0.95 * s {
                done = false;
                scale[i] *= f;
                let g = 1.0 / f;
                for j in 0..n {
                    a[(i, j)] *= g;
                }
                for j in 0..n {
                    a[(j, i)] *= f;
                }
            }
        }
        if done {
            return scale;
        }
    }
}

/// Reduces `h` in place to upper Hessenberg form and returns the orthogonal
/// `V` with `A = V H Vᵀ` when `accumulate` is set.
pub(crate) fn hessenberg(h: &mut DenseMatrix, accumulate: bool) -> Option<DenseMatrix> {
    let n = h.n();
    if n < 3 {
        return accumulate.then(|| DenseMatrix::identity(n));
    }
    let high = n - 1;
    let mut ort = vec![0.0; n];
    for m in 1..high {
        let scale: f64 = (m..=high).map(|i| h[(i, m - 1)].abs()).sum();
        if scale == 0.0 {
            continue;
        }
        let mut hh = 0.0;
        for i in (m..=high).rev() {
            ort[i] = h[(i, m - 1)] / scale;
            hh += ort[i] * ort[i];
        }
        let mut g = hh.sqrt();
        if ort[m] > 0.0 {
            g = -g;
        }
        hh -= ort[m] * g;
        ort[m] -= g;

        for j in m..n {
            let mut f = 0.0;
            for i in (m..=high).rev() {
                f += ort[i] * h[(i, j)];
            }
            f /= hh;
            for i in m..=high {
                h[(i, j)] -= f * ort[i];
            }
        }
        for i in 0..=high {
            let mut f = 0.0;
            for j in (m..=high).rev() {
                f += ort[j] * h[(i, j)];
            }
            f /= hh;
            for j in m..=high {
                h[(i, j)] -= f * ort[j];
            }
        }
        ort[m] *= scale;
        h[(m, m - 1)] = scale * g;
    }

    let v = accumulate.then(|| {
        let mut v = DenseMatrix::identity(n);
        for m in (1..high).rev() {
            if h[(m, m - 1)] == 0.0 {
                continue;
            }
            for i in m + 1..=high {
                ort[i] = h[(i, m - 1)];
            }
            for j in m..=high {
                let mut g = 0.0;
                for i in m..=high {
                    g += ort[i] * v[(i, j)];
                }
                g = (g / ort[m]) / h[(m, m - 1)];
                for i in m..=high {
                    v[(i, j)] += g * ort[i];
                }
            }
        }
        v
    });

    for i in 2..n {
        for j in 0..i - 1 {
            h[(i, j)] = 0.0;
        }
    }
    v
}

#[inline]
fn sign(a: f64, b: f64) -> f64 {
    if b >= 0.0 {
        a.abs()
    } else {
        -a.abs()
    }
}

/// Eigenvalues of an upper Hessenberg matrix by the Francis double-shift QR
/// iteration. `h` is destroyed. Total sweep count is capped at `max_sweeps`.
pub(crate) fn hqr(h: &mut DenseMatrix, max_sweeps: usize) -> Result<Vec<Complex64>> {
    let n = h.n();
    // 1-based indexing keeps the deflation logic legible.
    macro_rules! a {
        ($i:expr, $j:expr) => {
            h[(($i) - 1, ($j) - 1)]
        };
    }
    let mut wr = vec![0.0; n + 1];
    let mut wi = vec![0.0; n + 1];
    let mut found = vec![false; n + 1];

    let mut anorm = 0.0;
    let mut amax: f64 = 0.0;
    for i in 1..=n {
        for j in i.saturating_sub(1).max(1)..=n {
            anorm += a!(i, j).abs();
            amax = amax.max(a!(i, j).abs());
        }
    }
    // normwise floor: without it a cluster of rounding-level entries (rank
    // deficient inputs) never meets the purely local test below
    let floor = f64::EPSILON * amax;

    let mut sweeps = 0usize;
    let mut nn = n;
    let mut t = 0.0;
    let (mut p, mut q, mut r): (f64, f64, f64);
    let (mut x, mut y, mut z, mut w);
    while nn >= 1 {
        let mut its = 0;
        loop {
            let mut l = nn;
            while l >= 2 {
                let mut s = a!(l - 1, l - 1).abs() + a!(l, l).abs();
                if s == 0.0 {
                    s = anorm;
                }
                if a!(l, l - 1).abs() <= f64::EPSILON * s || a!(l, l - 1).abs() <= floor {
                    a!(l, l - 1) = 0.0;
                    break;
                }
                l -= 1;
            }
            x = a!(nn, nn);
            if l == nn {
                wr[nn] = x + t;
                wi[nn] = 0.0;
                found[nn] = true;
                nn -= 1;
            } else {
                y = a!(nn - 1, nn - 1);
                w = a!(nn, nn - 1) * a!(nn - 1, nn);
                if l == nn - 1 {
                    p = 0.5 * (y - x);
                    q = p * p + w;
                    z = q.abs().sqrt();
                    x += t;
                    if q >= 0.0 {
                        z = p + sign(z, p);
                        wr[nn - 1] = x + z;
                        wr[nn] = x + z;
                        if z != 0.0 {
                            wr[nn] = x - w / z;
                        }
                        wi[nn - 1] = 0.0;
                        wi[nn] = 0.0;
                    } else {
                        wr[nn - 1] = x + p;
                        wr[nn] = x + p;
                        wi[nn - 1] = -z;
                        wi[nn] = z;
                    }
                    found[nn] = true;
                    found[nn - 1] = true;
                    nn -= 2;
                } else {
                    if sweeps >= max_sweeps {
                        let found_values = (1..=n)
                            .filter(|&i| found[i])
                            .map(|i| Complex64::new(wr[i], wi[i]))
                            .collect();
                        return Err(Error::NoConvergence {
                            sweeps,
                            partial: Box::new(PartialReduction {
                                hessenberg: h.as_slice().to_vec(),
                                n,
                                found: found_values,
                            }),
                        });
                    }
                    if its > 0 && its % 10 == 0 {
                        // exceptional shift
                        t += x;
                        for i in 1..=nn {
                            a!(i, i) -= x;
                        }
                        let s = a!(nn, nn - 1).abs() + a!(nn - 1, nn - 2).abs();
                        x = 0.75 * s;
                        y = x;
                        w = -0.4375 * s * s;
                    }
                    its += 1;
                    sweeps += 1;
                    let mut m = nn - 2;
                    loop {
                        z = a!(m, m);
                        r = x - z;
                        let s = y - z;
                        p = (r * s - w) / a!(m + 1, m) + a!(m, m + 1);
                        q = a!(m + 1, m + 1) - z - r - s;
                        r = a!(m + 2, m + 1);
                        let s = p.abs() + q.abs() + r.abs();
                        p /= s;
                        q /= s;
                        r /= s;
                        if m == l {
                            break;
                        }
                        let u = a!(m, m - 1).abs() * (q.abs() + r.abs());
                        let v = p.abs() * (a!(m - 1, m - 1).abs() + z.abs() + a!(m + 1, m + 1).abs());
                        if u <= f64::EPSILON * v {
                            break;
                        }
                        m -= 1;
                    }
                    for i in m + 2..=nn {
                        a!(i, i - 2) = 0.0;
                        if i != m + 2 {
                            a!(i, i - 3) = 0.0;
                        }
                    }
                    let mut k = m;
                    while k < nn {
                        if k != m {
                            p = a!(k, k - 1);
                            q = a!(k + 1, k - 1);
                            r = 0.0;
                            if k != nn - 1 {
                                r = a!(k + 2, k - 1);
                            }
                            x = p.abs() + q.abs() + r.abs();
                            if x != 0.0 {
                                p /= x;
                                q /= x;
                                r /= x;
                            }
                        }
                        let s = sign((p * p + q * q + r * r).sqrt(), p);
                        if s != 0.0 {
                            if k == m {
                                if l != m {
                                    a!(k, k - 1) = -a!(k, k - 1);
                                }
                            } else {
                                a!(k, k - 1) = -s * x;
                            }
                            p += s;
                            x = p / s;
                            y = q / s;
                            z = r / s;
                            q /= p;
                            r /= p;
                            for j in k..=nn {
                                p = a!(k, j) + q * a!(k + 1, j);
                                if k != nn - 1 {
                                    p += r * a!(k + 2, j);
                                    a!(k + 2, j) -= p * z;
                                }
                                a!(k + 1, j) -= p * y;
                                a!(k, j) -= p * x;
                            }
                            let mmin = if nn < k + 3 { nn } else { k + 3 };
                            for i in l..=mmin {
                                p = x * a!(i, k) + y * a!(i, k + 1);
                                if k != nn - 1 {
                                    p += z * a!(i, k + 2);
                                    a!(i, k + 2) -= p * r;
                                }
                                a!(i, k + 1) -= p * q;
                                a!(i, k) -= p;
                            }
                        }
                        k += 1;
                    }
                }
            }
            if nn < 2 || l + 1 >= nn {
                break;
            }
        }
    }
    Ok((1..=n).map(|i| Complex64::new(wr[i], wi[i])).collect())
}

/// Output of the full reduction, kept around for residual checks.
pub(crate) struct Reduction {
    pub values: Vec<Complex64>,
    hessenberg: DenseMatrix,
    orthogonal: Option<DenseMatrix>,
    balance: Vec<f64>,
}

pub(crate) fn reduce(m: &DenseMatrix, sweeps_per_dim: usize, accumulate: bool) -> Result<Reduction> {
    let n = m.n();
    if n == 1 {
        return Ok(Reduction {
            values: vec![Complex64::new(m[(0, 0)], 0.0)],
            hessenberg: m.clone(),
            orthogonal: accumulate.then(|| DenseMatrix::identity(1)),
            balance: vec![1.0],
        });
    }
    let mut h = m.clone();
    let balance = balance(&mut h);
    let orthogonal = hessenberg(&mut h, accumulate);
    let mut work = h.clone();
    let values = hqr(&mut work, sweeps_per_dim * n)?;
    Ok(Reduction {
        values,
        hessenberg: h,
        orthogonal,
        balance,
    })
}

impl Reduction {
    /// Unit eigenvector estimate for `lambda` in the coordinates of the
    /// original matrix, by inverse iteration on the Hessenberg form.
    pub fn eigenvector(&self, lambda: Complex64) -> Vec<Complex64> {
        let h = &self.hessenberg;
        let n = h.n();
        let hnorm = h.frobenius_norm();
        let tiny = f64::EPSILON * if hnorm > 0.0 { hnorm } else { 1.0 };
        let lu = HessenbergLu::new(h, lambda, tiny);
        let mut y = vec![Complex64::new(1.0, 0.0); n];
        for _ in 0..3 {
            y = lu.solve(y);
            normalize(&mut y);
        }
        let x = match &self.orthogonal {
            Some(v) => (0..n)
                .map(|i| (0..n).map(|j| y[j] * v[(i, j)]).sum::<Complex64>())
                .collect(),
            None => y,
        };
        let mut out: Vec<Complex64> = x.iter().zip(&self.balance).map(|(xi, d)| xi * d).collect();
        normalize(&mut out);
        out
    }
}

fn normalize(v: &mut [Complex64]) {
    let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if norm > 0.0 && norm.is_finite() {
        for z in v.iter_mut() {
            *z /= norm;
        }
    }
}

/// `‖M v − λ v‖₂ / ‖M‖_F` for unit `v`.
pub(crate) fn relative_residual(m: &DenseMatrix, lambda: Complex64, v: &[Complex64]) -> f64 {
    let norm = m.frobenius_norm();
    if norm == 0.0 {
        return 0.0;
    }
    let n = m.n();
    let mut acc = 0.0;
    for i in 0..n {
        let mut s = -lambda * v[i];
        for (j, vj) in v.iter().enumerate() {
            s += vj * m[(i, j)];
        }
        acc += s.norm_sqr();
    }
    acc.sqrt() / norm
}

/// LU factorisation of `H − λI` for upper Hessenberg `H`; pivoting only
/// between adjacent rows.
struct HessenbergLu {
    n: usize,
    u: Vec<Complex64>,
    mult: Vec<Complex64>,
    swapped: Vec<bool>,
}

impl HessenbergLu {
    fn new(h: &DenseMatrix, lambda: Complex64, tiny: f64) -> Self {
        let n = h.n();
        let mut u: Vec<Complex64> = (0..n * n)
            .map(|idx| {
                let (i, j) = (idx / n, idx % n);
                let base = Complex64::new(h[(i, j)], 0.0);
                if i == j {
                    base - lambda
                } else {
                    base
                }
            })
            .collect();
        let mut mult = vec![Complex64::new(0.0, 0.0); n];
        let mut swapped = vec![false; n];
        for k in 0..n.saturating_sub(1) {
            if u[(k + 1) * n + k].norm() > u[k * n + k].norm() {
                for j in k..n {
                    u.swap(k * n + j, (k + 1) * n + j);
                }
                swapped[k] = true;
            }
            if u[k * n + k].norm() < tiny {
                u[k * n + k] = Complex64::new(tiny, 0.0);
            }
            let factor = u[(k + 1) * n + k] / u[k * n + k];
            mult[k] = factor;
            for j in k..n {
                let delta = factor * u[k * n + j];
                u[(k + 1) * n + j] -= delta;
            }
        }
        if u[n * n - 1].norm() < tiny {
            u[n * n - 1] = Complex64::new(tiny, 0.0);
        }
        Self { n, u, mult, swapped }
    }

    fn solve(&self, mut b: Vec<Complex64>) -> Vec<Complex64> {
        let n = self.n;
        for k in 0..n.saturating_sub(1) {
            if self.swapped[k] {
                b.swap(k, k + 1);
            }
            let delta = self.mult[k] * b[k];
            b[k + 1] -= delta;
        }
        for i in (0..n).rev() {
            let mut s = b[i];
            for j in i + 1..n {
                s -= self.u[i * n + j] * b[j];
            }
            b[i] = s / self.u[i * n + i];
        }
        b
    }
}
