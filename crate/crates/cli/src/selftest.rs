//! Invariant suite over the bundled fixtures and small generated cases.

use num_complex::Complex64;
use serde::Serialize;

use re_kit::frobenius::{multiplicity_sum_check, re_via_atoms};
use re_kit::kernels::{
    configuration_re, discretize, kernel_symmetrizability_check, ConfigurationKernel, GraphonSisParams, QuadratureGrid,
};
use re_kit::linalg::lu::Lu;
use re_kit::linalg::multiset_close;
use re_kit::re::{check_elementary_properties, check_transform_invariance, re_value};
use re_kit::shape::{classify_shape_with, Classification, ClassifyOptions};
use re_kit::symmetrize::{symmetrize, Symmetrization, DEFAULT_SUPPORT_TOL};
use re_kit::{fixtures, NextGenMatrix, Result, Strategy};

#[derive(Debug, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Serialize)]
pub struct SelftestReport {
    pub passed: bool,
    pub samples: u64,
    pub seed: u64,
    pub checks: Vec<Check>,
}

fn spectrum_near(m: &NextGenMatrix, expected: [f64; 3]) -> Result<(bool, String)> {
    let spec = re_kit::spectrum(m, 1e-8)?;
    let want: Vec<Complex64> = expected.iter().map(|x| Complex64::new(*x, 0.0)).collect();
    let got = spec.flatten();
    Ok((multiset_close(&got, &want, 0.05), format!("{got:?}")))
}

fn friedland_inverse() -> (bool, String) {
    let k = fixtures::friedland();
    let lu = Lu::new(k.entries(), 1e-300);
    let printed = fixtures::friedland_inverse();
    let mut worst = 0.0f64;
    for j in 0..3 {
        let mut e = [0.0; 3];
        e[j] = 1.0;
        let col = lu.solve(&e);
        for i in 0..3 {
            worst = worst.max((col[i] - printed[(i, j)]).abs());
        }
    }
    (worst <= 1e-9, format!("max deviation {worst:e}"))
}

fn checks(samples: u64, seed: u64) -> Result<Vec<Check>> {
    let conv = fixtures::counter_convex();
    let conc = fixtures::counter_concave();
    let friedland = fixtures::friedland();
    let opts = ClassifyOptions {
        samples,
        seed,
        margin: None,
    };
    let mut out = Vec::new();
    let mut push = |name, passed, detail: String| out.push(Check { name, passed, detail });

    let (ok, detail) = spectrum_near(&conv, [24.8, 2.9, 1.3])?;
    push("counter-convex spectrum", ok, detail);
    let (ok, detail) = spectrum_near(&conc, [26.3, -1.4, -3.9])?;
    push("counter-concave spectrum", ok, detail);
    let (ok, detail) = friedland_inverse();
    push("friedland inverse", ok, detail);

    let v = classify_shape_with(&friedland, &opts)?;
    push(
        "friedland convex-certified",
        v.classification == Classification::ConvexCertified,
        format!("{:?}", v.classification),
    );
    let v = classify_shape_with(&conv, &opts)?;
    push(
        "counter-convex breaks convexity",
        v.convexity_violation.is_some(),
        format!("{:?}", v.convexity_violation.map(|w| w.gap)),
    );
    let v = classify_shape_with(&conc, &opts)?;
    push(
        "counter-concave breaks both",
        v.convexity_violation.is_some() && v.concavity_violation.is_some(),
        format!(
            "{:?} / {:?}",
            v.convexity_violation.map(|w| w.gap),
            v.concavity_violation.map(|w| w.gap)
        ),
    );

    let sym = symmetrize(&conv, DEFAULT_SUPPORT_TOL)?;
    let ok = matches!(&sym, Symmetrization::Obstructed(o) if o.witness == [0, 1, 2]);
    push("counter-convex cycle obstruction", ok, format!("{sym:?}"));

    for (name, m) in [("elementary properties (counter-convex)", &conv), ("elementary properties (friedland)", &friedland)] {
        let rep = check_elementary_properties(m, samples.min(1000), seed, 1e-9)?;
        push(
            name,
            rep.passed(),
            format!(
                "{} monotonicity, {} homogeneity violations",
                rep.monotonicity_violations.len(),
                rep.homogeneity_violations.len()
            ),
        );
    }

    let eta = Strategy::new(vec![0.3, 0.8, 0.5])?;
    let rep = check_transform_invariance(&conc, &[0.5, 2.0, 3.0], &eta)?;
    push("transform invariance", rep.passed(), format!("{:?}", rep.checks));

    let block = NextGenMatrix::from_rows(&[
        [2.0, 1.0, 0.0, 0.0],
        [1.0, 1.0, 0.0, 0.0],
        [3.0, 0.5, 0.0, 4.0],
        [0.0, 2.0, 1.0, 0.0],
    ])?;
    let eta = Strategy::new(vec![0.4, 0.9, 0.7, 0.2])?;
    let atoms = re_via_atoms(&block, &eta)?;
    let direct = re_value(&block, eta.as_slice())?;
    push(
        "atom-max identity",
        (atoms.value - direct).abs() <= 1e-8 * (1.0 + direct),
        format!("{} vs {direct}", atoms.value),
    );
    let mult = multiplicity_sum_check(&block, &eta)?;
    push("multiplicity sum", mult.passed(), format!("{} mismatches", mult.mismatches.len()));

    let grid = QuadratureGrid::midpoint(64)?;
    let ck = ConfigurationKernel::new(|x| 1.0 + x, |y| 2.0 - y);
    let eta = Strategy::new(grid.nodes().iter().map(|x| 1.0 - 0.5 * x).collect())?;
    let closed = configuration_re(&ck, &grid, &eta)?;
    let numeric = re_value(&discretize(&ck.kernel(), &grid)?, eta.as_slice())?;
    push(
        "configuration kernel closed form",
        (closed - numeric).abs() <= 1e-10 * closed,
        format!("{closed} vs {numeric}"),
    );

    let sis = GraphonSisParams {
        beta: std::sync::Arc::new(|x| 1.0 + x),
        w: std::sync::Arc::new(|x, y| (-(x - y).abs()).exp()),
        theta: std::sync::Arc::new(|y| 0.5 + y * y),
        gamma: std::sync::Arc::new(|_| 2.0),
    };
    let cert = kernel_symmetrizability_check(&sis.factorized(), &grid);
    push("graphon SIS certificate", cert.is_ok(), format!("{:?}", cert.err()));

    Ok(out)
}

pub fn run(samples: u64, seed: u64) -> SelftestReport {
    let checks = match checks(samples, seed) {
        Ok(c) => c,
        Err(e) => vec![Check {
            name: "suite",
            passed: false,
            detail: e.to_string(),
        }],
    };
    SelftestReport {
        passed: checks.iter().all(|c| c.passed),
        samples,
        seed,
        checks,
    }
}
