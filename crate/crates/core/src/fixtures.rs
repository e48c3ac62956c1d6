//! Bundled reference matrices.

use crate::linalg::DenseMatrix;
use crate::matrix::NextGenMatrix;

/// Nonnegative spectrum, yet `R_e` is not convex.
pub fn counter_convex() -> NextGenMatrix {
    NextGenMatrix::from_rows(&[[16.0, 12.0, 11.0], [1.0, 12.0, 12.0], [8.0, 1.0, 1.0]])
        .expect("valid fixture")
}

/// Spectrum `{R_0} ∪ ℝ₋`, yet `R_e` is neither convex nor concave.
pub fn counter_concave() -> NextGenMatrix {
    NextGenMatrix::from_rows(&[[9.0, 13.0, 14.0], [18.0, 6.0, 5.0], [1.0, 6.0, 6.0]])
        .expect("valid fixture")
}

/// Symmetric positive definite, with an inverse that is not an M-matrix.
pub fn friedland() -> NextGenMatrix {
    NextGenMatrix::from_rows(&[[3.0, 2.0, 0.0], [2.0, 2.0, 1.0], [0.0, 1.0, 4.0]])
        .expect("valid fixture")
}

/// Printed inverse of [`friedland`].
pub fn friedland_inverse() -> DenseMatrix {
    DenseMatrix::from_rows(&[[1.4, -1.6, 0.4], [-1.6, 2.4, -0.6], [0.4, -0.6, 0.4]])
}

pub const NAMES: [&str; 3] = ["counter-convex", "counter-concave", "friedland"];

/// Looks up a bundled matrix by name (`counter-convex`, `conv`, ...).
pub fn by_name(name: &str) -> Option<NextGenMatrix> {
    match name {
        "counter-convex" | "conv" => Some(counter_convex()),
        "counter-concave" | "conc" => Some(counter_concave()),
        "friedland" => Some(friedland()),
        _ => None,
    }
}
