//! Effective reproduction number analysis for nonnegative next-generation
//! operators.
//!
//! `R_e(η) = ρ(K · Diag(η))` for a nonnegative matrix `K` and a strategy
//! `η ∈ [0,1]^N`. The crate evaluates it exactly, certifies diagonal
//! symmetrizability, classifies convexity/concavity from inertia, searches
//! for shape violations, decomposes `K` into irreducible atoms, discretises
//! integral kernels on `[0,1]`, and minimises `R_e` under a linear budget.

pub mod error;
pub mod fixtures;
pub mod frobenius;
pub mod kernels;
pub mod linalg;
pub mod matrix;
pub mod optimize;
pub mod re;
pub mod rng;
pub mod shape;
pub mod symmetrize;

pub use error::{Error, Result};
pub use linalg::{inertia, perron_pair, spectral_radius, spectrum, DenseMatrix, Inertia, Spectrum};
pub use matrix::{NextGenMatrix, Strategy};

/// Version tag written into every JSON report.
pub const SCHEMA_VERSION: u32 = 1;
