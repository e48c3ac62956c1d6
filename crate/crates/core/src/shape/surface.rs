use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::NextGenMatrix;
use crate::re::re_value;

const PLANE_SUM: f64 = 1.0 / 3.0;

/// Lattice directions scanned for midpoint violations.
const DIRECTIONS: [(i64, i64); 8] = [(1, 0), (0, 1), (1, -1), (1, 1), (2, -1), (1, -2), (2, 1), (1, 2)];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurfacePoint {
    pub eta1: f64,
    pub eta2: f64,
    pub re: f64,
}

/// Two grid points and their midpoint, with
/// `gap = R(mid) − (R(a) + R(b))/2` for convexity and the negation for
/// concavity, so that a positive gap is always a violation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridViolation {
    pub a: [f64; 3],
    pub b: [f64; 3],
    pub mid: [f64; 3],
    pub re_a: f64,
    pub re_b: f64,
    pub re_mid: f64,
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlaneSurface {
    pub grid: usize,
    pub points: Vec<SurfacePoint>,
    pub convexity: Option<GridViolation>,
    pub concavity: Option<GridViolation>,
}

impl PlaneSurface {
    /// `eta1,eta2,re` rows for external plotting.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("eta1,eta2,re\n");
        for p in &self.points {
            out.push_str(&format!("{},{},{}\n", p.eta1, p.eta2, p.re));
        }
        out
    }
}

/// Evaluates `R_e` on a `grid × grid` lattice of the plane
/// `η₁ + η₂ + η₃ = 1/3` (points with `η₃ < 0` dropped) and scans lattice
/// midpoints for the largest convexity and concavity gaps.
pub fn plane_surface(m: &NextGenMatrix, grid: usize) -> Result<PlaneSurface> {
    if m.n() != 3 {
        return Err(Error::InvalidInput(format!("the plane surface needs a 3×3 matrix, got {}×{}", m.n(), m.n())));
    }
    if grid < 3 {
        return Err(Error::InvalidInput(format!("grid must be at least 3, got {grid}")));
    }
    let last = grid - 1;
    let step = PLANE_SUM / last as f64;
    let eta = |i: usize, j: usize| -> [f64; 3] {
        let k = last - i - j;
        [i as f64 * step, j as f64 * step, k as f64 * step]
    };
    let table: Vec<Vec<f64>> = (0..grid)
        .into_par_iter()
        .map(|i| (0..grid - i).map(|j| re_value(m, &eta(i, j))).collect::<Result<Vec<f64>>>())
        .collect::<Result<_>>()?;

    let at = |i: i64, j: i64| -> Option<f64> {
        if i < 0 || j < 0 || i + j > last as i64 {
            return None;
        }
        Some(table[i as usize][j as usize])
    };
    let mut convexity: Option<(f64, (i64, i64), (i64, i64))> = None;
    let mut concavity: Option<(f64, (i64, i64), (i64, i64))> = None;
    for i in 0..grid as i64 {
        for j in 0..grid as i64 - i {
            let ra = table[i as usize][j as usize];
            for (di, dj) in DIRECTIONS {
                let mut k = 1;
                while let Some(rb) = at(i + 2 * k * di, j + 2 * k * dj) {
                    let rm = at(i + k * di, j + k * dj).expect("midpoint of two grid points lies on the grid");
                    let gap = rm - 0.5 * (ra + rb);
                    let b = (i + 2 * k * di, j + 2 * k * dj);
                    if convexity.map_or(true, |c| gap > c.0) {
                        convexity = Some((gap, (i, j), b));
                    }
                    if concavity.map_or(true, |c| -gap > c.0) {
                        concavity = Some((-gap, (i, j), b));
                    }
                    k += 1;
                }
            }
        }
    }

    let witness = |best: Option<(f64, (i64, i64), (i64, i64))>| -> Option<GridViolation> {
        let (gap, a, b) = best?;
        if gap <= 0.0 {
            return None;
        }
        let mid = ((a.0 + b.0) / 2, (a.1 + b.1) / 2);
        let pt = |p: (i64, i64)| eta(p.0 as usize, p.1 as usize);
        Some(GridViolation {
            a: pt(a),
            b: pt(b),
            mid: pt(mid),
            re_a: table[a.0 as usize][a.1 as usize],
            re_b: table[b.0 as usize][b.1 as usize],
            re_mid: table[mid.0 as usize][mid.1 as usize],
            gap,
        })
    };

    let points = (0..grid)
        .flat_map(|i| (0..grid - i).map(move |j| (i, j)))
        .map(|(i, j)| {
            let e = eta(i, j);
            SurfacePoint {
                eta1: e[0],
                eta2: e[1],
                re: table[i][j],
            }
        })
        .collect();
    Ok(PlaneSurface {
        grid,
        points,
        convexity: witness(convexity),
        concavity: witness(concavity),
    })
}
