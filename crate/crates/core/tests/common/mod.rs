#![allow(dead_code)]

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use re_kit::linalg::DenseMatrix;
use re_kit::NextGenMatrix;

pub fn rng(seed: u64) -> ChaCha8Rng {
    use rand::SeedableRng;
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_nonneg(rng: &mut impl Rng, n: usize, density: f64) -> DenseMatrix {
    DenseMatrix::from_fn(n, |_, _| if rng.gen_bool(density) { rng.gen_range(0.0..1.0) } else { 0.0 })
}

pub fn random_eta(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.gen::<f64>()).collect()
}

/// `D·AᵀA` with `A ≥ 0`: symmetrizable by `D⁻¹`, spectrum ≥ 0.
pub fn convex_instance(rng: &mut impl Rng, n: usize) -> (NextGenMatrix, Vec<f64>) {
    let a = random_nonneg(rng, n, 0.8);
    let s = a.transpose().matmul(&a);
    let d: Vec<f64> = (0..n).map(|_| rng.gen_range(0.5..2.0)).collect();
    let m = s.scale_rows(&d);
    (NextGenMatrix::new(m, None).unwrap(), d)
}

/// `D·(ρ v vᵀ − B Bᵀ)` kept entrywise nonnegative: exactly one positive
/// eigenvalue. Scaled so that `R_0 = 1`.
pub fn concave_instance(rng: &mut impl Rng, n: usize) -> (NextGenMatrix, Vec<f64>) {
    let v: Vec<f64> = (0..n).map(|_| rng.gen_range(0.5..1.0)).collect();
    let k = rng.gen_range(1..=n.max(2) - 1);
    let b = DenseMatrix::from_fn(n, |_, j| if j < k { rng.gen_range(0.0..1.0) } else { 0.0 });
    let bbt = b.matmul(&b.transpose());
    let mut rho: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            rho = rho.max(bbt[(i, j)] / (v[i] * v[j]));
        }
    }
    let rho = rho * rng.gen_range(1.05..2.0) + 0.1;
    let s = DenseMatrix::from_fn(n, |i, j| (rho * v[i] * v[j] - bbt[(i, j)]).max(0.0));
    let d: Vec<f64> = (0..n).map(|_| rng.gen_range(0.5..2.0)).collect();
    let m = s.scale_rows(&d);
    let r = re_kit::linalg::spectral_radius_of(&m).unwrap();
    let m = DenseMatrix::from_fn(n, |i, j| m[(i, j)] / r);
    (NextGenMatrix::new(m, None).unwrap(), d)
}

/// Block lower-triangular matrix with `atoms` diagonal blocks, hidden by a
/// random symmetric permutation. Some size-one blocks are zero.
pub fn block_triangular(rng: &mut impl Rng, atoms: usize, max_block: usize) -> NextGenMatrix {
    let sizes: Vec<usize> = (0..atoms).map(|_| rng.gen_range(1..=max_block)).collect();
    let n: usize = sizes.iter().sum();
    let mut owner = Vec::with_capacity(n);
    for (b, s) in sizes.iter().enumerate() {
        owner.extend(std::iter::repeat(b).take(*s));
    }
    let zero_block: Vec<bool> = sizes.iter().map(|s| *s == 1 && rng.gen_bool(0.2)).collect();
    let mut m = DenseMatrix::zeros(n);
    for i in 0..n {
        for j in 0..n {
            let (bi, bj) = (owner[i], owner[j]);
            m[(i, j)] = if bi == bj {
                if zero_block[bi] {
                    0.0
                } else {
                    rng.gen_range(0.1..1.0)
                }
            } else if bi > bj && rng.gen_bool(0.5) {
                rng.gen_range(0.0..1.0)
            } else {
                0.0
            };
        }
    }
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(rng);
    let permuted = DenseMatrix::from_fn(n, |i, j| m[(perm[i], perm[j])]);
    NextGenMatrix::new(permuted, None).unwrap()
}

/// Largest modulus by power iteration on `M + I` (valid for nonnegative `M`
/// with a primitive shift), minus one.
pub fn power_radius(m: &DenseMatrix, iters: usize) -> f64 {
    let n = m.n();
    let mut x = vec![1.0; n];
    let mut lambda = 0.0;
    for _ in 0..iters {
        let mut y = m.mul_vec(&x);
        for i in 0..n {
            y[i] += x[i];
        }
        let norm = y.iter().fold(0.0f64, |a, b| a.max(b.abs()));
        lambda = norm / x.iter().fold(0.0f64, |a, b| a.max(b.abs()));
        x = y.into_iter().map(|v| v / norm).collect();
    }
    lambda - 1.0
}
