//! Integral kernels on `[0,1]` and their Nyström discretization.
//!
//! A kernel `k` with a quadrature grid `(x_i, w_i)` becomes the matrix
//! `K_ij = k(x_i, x_j) w_j`, so `K η` approximates `∫ k(x,y) η(y) dμ(y)`.
//! The grid weights sum to one: `μ` is treated as a probability measure.

use std::fmt;
use std::path::Path;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;
use crate::matrix::{json_error, parse_csv_rows, NextGenMatrix, Strategy};
use crate::symmetrize::{symmetrize_with, Symmetrization, SymmetrizationCertificate, SymmetrizeOptions};

pub type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;
pub type KernelFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

pub const DEFAULT_GRID_SIZE: usize = 128;
/// Relative tolerance when comparing a certificate to its expected diagonal.
pub const KERNEL_CERTIFICATE_TOL: f64 = 1e-8;

#[derive(Clone)]
pub struct KernelSpec {
    evaluate: KernelFn,
    description: String,
}

impl fmt::Debug for KernelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("KernelSpec").field("description", &self.description).finish()
    }
}

impl KernelSpec {
    pub fn new(description: impl Into<String>, evaluate: impl Fn(f64, f64) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            evaluate: Arc::new(evaluate),
            description: description.into(),
        }
    }

    pub fn constant(c: f64) -> Self {
        Self::new(format!("constant {c}"), move |_, _| c)
    }

    pub fn evaluate(&self, x: f64, y: f64) -> f64 {
        (self.evaluate)(x, y)
    }

    pub fn description(&self) -> &str {
        &self.description
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Rule {
    Midpoint,
    Trapezoid,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadratureGrid {
    nodes: Vec<f64>,
    weights: Vec<f64>,
    rule: Rule,
}

impl QuadratureGrid {
    pub fn new(rule: Rule, m: usize) -> Result<Self> {
        match rule {
            Rule::Midpoint => Self::midpoint(m),
            Rule::Trapezoid => Self::trapezoid(m),
        }
    }

    pub fn midpoint(m: usize) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidInput("a midpoint grid needs at least one node".into()));
        }
        let h = 1.0 / m as f64;
        Ok(Self {
            nodes: (0..m).map(|i| (i as f64 + 0.5) * h).collect(),
            weights: vec![h; m],
            rule: Rule::Midpoint,
        })
    }

    pub fn trapezoid(m: usize) -> Result<Self> {
        if m < 2 {
            return Err(Error::InvalidInput("a trapezoid grid needs at least two nodes".into()));
        }
        let h = 1.0 / (m - 1) as f64;
        let mut weights = vec![h; m];
        weights[0] = h / 2.0;
        weights[m - 1] = h / 2.0;
        Ok(Self {
            nodes: (0..m).map(|i| i as f64 * h).collect(),
            weights,
            rule: Rule::Trapezoid,
        })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn rule(&self) -> Rule {
        self.rule
    }
}

impl Default for QuadratureGrid {
    fn default() -> Self {
        Self::midpoint(DEFAULT_GRID_SIZE).expect("positive size")
    }
}

fn check_value(v: f64, x: f64, y: f64) -> Result<f64> {
    if v.is_finite() && v >= 0.0 {
        Ok(v)
    } else {
        Err(Error::InvalidInput(format!("kernel value {v} at (x, y) = ({x}, {y}) is not finite and nonnegative")))
    }
}

/// `K_ij = k(x_i, x_j) w_j`, carrying the grid weights on the matrix.
pub fn discretize(k: &KernelSpec, grid: &QuadratureGrid) -> Result<NextGenMatrix> {
    let (x, w) = (grid.nodes(), grid.weights());
    let m = grid.len();
    let rows: Vec<Vec<f64>> = (0..m)
        .into_par_iter()
        .map(|i| (0..m).map(|j| check_value(k.evaluate(x[i], x[j]), x[i], x[j]).map(|v| v * w[j])).collect())
        .collect::<Result<_>>()?;
    NextGenMatrix::new(DenseMatrix::from_rows(&rows), Some(w.to_vec()))
}

/// Tabulated kernel values `v_ij = k(x_i, x_j)` on `grid`.
pub fn discretize_tabulated(values: &DenseMatrix, grid: &QuadratureGrid) -> Result<NextGenMatrix> {
    if values.n() != grid.len() {
        return Err(Error::DimensionMismatch {
            what: "tabulated kernel",
            expected: grid.len(),
            found: values.n(),
        });
    }
    let (x, w) = (grid.nodes(), grid.weights());
    let mut out = DenseMatrix::zeros(values.n());
    for i in 0..values.n() {
        for j in 0..values.n() {
            out[(i, j)] = check_value(values[(i, j)], x[i], x[j])? * w[j];
        }
    }
    NextGenMatrix::new(out, Some(w.to_vec()))
}

/// Quadrature value of `(∫ (∫ |k(x,y)|^q dμ(y))^{p/q} dμ(x))^{1/p}` with
/// `q = p/(p−1)`.
pub fn double_norm(k: &KernelSpec, p: f64, grid: &QuadratureGrid) -> Result<f64> {
    if !(p > 1.0 && p.is_finite()) {
        return Err(Error::InvalidInput(format!("double norm exponent p = {p} must be finite and > 1")));
    }
    let q = p / (p - 1.0);
    let (x, w) = (grid.nodes(), grid.weights());
    let outer: f64 = (0..grid.len())
        .map(|i| {
            let inner: f64 = (0..grid.len()).map(|j| k.evaluate(x[i], x[j]).abs().powf(q) * w[j]).sum();
            w[i] * inner.powf(p / q)
        })
        .sum();
    Ok(outer.powf(1.0 / p))
}

/// Rank-one kernel `f ⊗ g`.
#[derive(Clone)]
pub struct ConfigurationKernel {
    pub f: ScalarFn,
    pub g: ScalarFn,
}

impl ConfigurationKernel {
    pub fn new(f: impl Fn(f64) -> f64 + Send + Sync + 'static, g: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            f: Arc::new(f),
            g: Arc::new(g),
        }
    }

    pub fn kernel(&self) -> KernelSpec {
        let (f, g) = (self.f.clone(), self.g.clone());
        KernelSpec::new("configuration f(x) g(y)", move |x, y| f(x) * g(y))
    }
}

/// `R_e = ∫ f g η dμ` on the grid.
pub fn configuration_re(ck: &ConfigurationKernel, grid: &QuadratureGrid, eta: &Strategy) -> Result<f64> {
    if eta.len() != grid.len() {
        return Err(Error::DimensionMismatch {
            what: "strategy",
            expected: grid.len(),
            found: eta.len(),
        });
    }
    Ok(grid
        .nodes()
        .iter()
        .zip(grid.weights())
        .zip(eta.as_slice())
        .map(|((x, w), e)| (ck.f)(*x) * (ck.g)(*x) * e * w)
        .sum())
}

/// `k(x,y) = f(x) s(x,y) g(y)` with `s` symmetric.
#[derive(Clone)]
pub struct FactorizedKernel {
    pub f: ScalarFn,
    pub s: KernelFn,
    pub g: ScalarFn,
}

impl FactorizedKernel {
    pub fn kernel(&self) -> KernelSpec {
        let (f, s, g) = (self.f.clone(), self.s.clone(), self.g.clone());
        KernelSpec::new("factorized f(x) s(x,y) g(y)", move |x, y| f(x) * s(x, y) * g(y))
    }
}

/// SIS kernel on a graphon: `k(x,y) = β(x) W(x,y) θ(y) / γ(y)`.
#[derive(Clone)]
pub struct GraphonSisParams {
    pub beta: ScalarFn,
    pub w: KernelFn,
    pub theta: ScalarFn,
    pub gamma: ScalarFn,
}

impl GraphonSisParams {
    /// Checks `W(x,y) = W(y,x)` and `γ > 0` at the grid nodes.
    pub fn validate(&self, grid: &QuadratureGrid) -> Result<()> {
        let x = grid.nodes();
        for (i, &xi) in x.iter().enumerate() {
            let gamma = (self.gamma)(xi);
            if !(gamma.is_finite() && gamma > 0.0) {
                return Err(Error::InvalidInput(format!("recovery rate γ({xi}) = {gamma} must be positive")));
            }
            for &xj in &x[i + 1..] {
                let (a, b) = ((self.w)(xi, xj), (self.w)(xj, xi));
                if (a - b).abs() > 1e-12 * a.abs().max(b.abs()).max(1.0) {
                    return Err(Error::InvalidInput(format!("graphon is not symmetric at ({xi}, {xj}): {a} vs {b}")));
                }
            }
        }
        Ok(())
    }

    pub fn factorized(&self) -> FactorizedKernel {
        let (theta, gamma) = (self.theta.clone(), self.gamma.clone());
        FactorizedKernel {
            f: self.beta.clone(),
            s: self.w.clone(),
            g: Arc::new(move |y| theta(y) / gamma(y)),
        }
    }

    pub fn kernel(&self) -> KernelSpec {
        let k = self.factorized().kernel();
        KernelSpec::new("graphon SIS β(x) W(x,y) θ(y)/γ(y)", move |x, y| k.evaluate(x, y))
    }
}

/// Discretizes a factorized kernel, symmetrizes it, and checks that the
/// certificate diagonal is proportional to `g(x_i) w_i / f(x_i)` on each
/// connected component.
pub fn kernel_symmetrizability_check(fk: &FactorizedKernel, grid: &QuadratureGrid) -> Result<SymmetrizationCertificate> {
    let x = grid.nodes();
    let expected: Vec<f64> = x
        .iter()
        .zip(grid.weights())
        .map(|(&xi, &wi)| {
            let (f, g) = ((fk.f)(xi), (fk.g)(xi));
            if f > 0.0 && g > 0.0 {
                Ok(g * wi / f)
            } else {
                Err(Error::Precondition(format!("f and g must be positive at node {xi}: f = {f}, g = {g}")))
            }
        })
        .collect::<Result<_>>()?;
    let m = discretize(&fk.kernel(), grid)?;
    let cert = match symmetrize_with(&m, &SymmetrizeOptions::default())? {
        Symmetrization::Certified(c) => c,
        Symmetrization::Obstructed(o) => {
            return Err(Error::Inconsistent(format!(
                "a kernel declared as f·s·g failed symmetrization ({:?} on {:?}); s is probably not symmetric",
                o.kind, o.witness
            )))
        }
    };
    for comp in &cert.components {
        let anchor = comp[0];
        for &i in comp {
            let want = expected[i] / expected[anchor] * cert.d[anchor];
            if (cert.d[i] - want).abs() > KERNEL_CERTIFICATE_TOL * want.abs() {
                return Err(Error::Inconsistent(format!(
                    "certificate entry d[{i}] = {} differs from the expected {want}",
                    cert.d[i]
                )));
            }
        }
    }
    Ok(cert)
}

/// Scalar profiles accepted in kernel definitions. A bare number is a
/// constant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ScalarDef {
    Value(f64),
    Profile(Profile),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Profile {
    Constant { value: f64 },
    /// `intercept + slope·x`
    Affine { intercept: f64, slope: f64 },
    /// `coefficient·x^exponent`
    Power {
        #[serde(default = "one")]
        coefficient: f64,
        exponent: f64,
    },
    /// `coefficient·exp(rate·x)`
    Exp {
        #[serde(default = "one")]
        coefficient: f64,
        rate: f64,
    },
}

fn one() -> f64 {
    1.0
}

impl ScalarDef {
    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            ScalarDef::Value(c) | ScalarDef::Profile(Profile::Constant { value: c }) => c,
            ScalarDef::Profile(Profile::Affine { intercept, slope }) => intercept + slope * x,
            ScalarDef::Profile(Profile::Power { coefficient, exponent }) => coefficient * x.powf(exponent),
            ScalarDef::Profile(Profile::Exp { coefficient, rate }) => coefficient * (rate * x).exp(),
        }
    }

    pub fn to_fn(&self) -> ScalarFn {
        let def = self.clone();
        Arc::new(move |x| def.eval(x))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum GraphonDef {
    Constant { value: f64 },
    /// `x·y`
    Product,
    /// `min(x, y)`
    Min,
    /// `1 − max(x, y)`
    OneMinusMax,
    /// `exp(−rate·|x − y|)`
    ExpDecay { rate: f64 },
}

impl GraphonDef {
    pub fn eval(&self, x: f64, y: f64) -> f64 {
        match *self {
            GraphonDef::Constant { value } => value,
            GraphonDef::Product => x * y,
            GraphonDef::Min => x.min(y),
            GraphonDef::OneMinusMax => 1.0 - x.max(y),
            GraphonDef::ExpDecay { rate } => (-rate * (x - y).abs()).exp(),
        }
    }

    pub fn to_fn(&self) -> KernelFn {
        let def = self.clone();
        Arc::new(move |x, y| def.eval(x, y))
    }
}

/// JSON kernel definitions, e.g.
/// `{"family": "graphon-sis", "beta": 1, "graphon": {"kind": "product"}, "theta": 1, "gamma": 1}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum KernelDef {
    GraphonSis {
        beta: ScalarDef,
        graphon: GraphonDef,
        theta: ScalarDef,
        gamma: ScalarDef,
    },
    Configuration {
        f: ScalarDef,
        g: ScalarDef,
    },
    Constant {
        value: f64,
    },
    Factorized {
        f: ScalarDef,
        s: GraphonDef,
        g: ScalarDef,
    },
    /// Kernel values at the nodes of a `rule` grid with as many nodes as rows.
    Tabulated {
        values: Vec<Vec<f64>>,
        #[serde(default = "default_rule")]
        rule: Rule,
    },
}

fn default_rule() -> Rule {
    Rule::Midpoint
}

impl KernelDef {
    pub fn from_json_str(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(json_error)
    }

    /// Reads a JSON definition, or a CSV table of kernel values (discretized
    /// on a midpoint grid unless overridden later).
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::InvalidInput(format!("cannot read {}: {e}", path.display())))?;
        let is_csv = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"));
        if is_csv {
            Ok(KernelDef::Tabulated {
                values: parse_csv_rows(&text)?,
                rule: Rule::Midpoint,
            })
        } else {
            Self::from_json_str(&text)
        }
    }

    pub fn is_tabulated(&self) -> bool {
        matches!(self, KernelDef::Tabulated { .. })
    }

    /// Pointwise kernel; `None` for tabulated definitions.
    pub fn kernel(&self) -> Option<KernelSpec> {
        match self {
            KernelDef::GraphonSis { .. } => self.graphon_sis().map(|p| p.kernel()),
            KernelDef::Configuration { f, g } => {
                let (f, g) = (f.to_fn(), g.to_fn());
                Some(ConfigurationKernel { f, g }.kernel())
            }
            KernelDef::Constant { value } => Some(KernelSpec::constant(*value)),
            KernelDef::Factorized { .. } => self.factorized().map(|k| k.kernel()),
            KernelDef::Tabulated { .. } => None,
        }
    }

    pub fn graphon_sis(&self) -> Option<GraphonSisParams> {
        match self {
            KernelDef::GraphonSis {
                beta,
                graphon,
                theta,
                gamma,
            } => Some(GraphonSisParams {
                beta: beta.to_fn(),
                w: graphon.to_fn(),
                theta: theta.to_fn(),
                gamma: gamma.to_fn(),
            }),
            _ => None,
        }
    }

    /// The `f·s·g` structure when the family carries one.
    pub fn factorized(&self) -> Option<FactorizedKernel> {
        match self {
            KernelDef::GraphonSis { .. } => self.graphon_sis().map(|p| p.factorized()),
            KernelDef::Configuration { f, g } => Some(FactorizedKernel {
                f: f.to_fn(),
                s: Arc::new(|_, _| 1.0),
                g: g.to_fn(),
            }),
            KernelDef::Constant { value } => {
                let c = *value;
                Some(FactorizedKernel {
                    f: Arc::new(move |_| c),
                    s: Arc::new(|_, _| 1.0),
                    g: Arc::new(|_| 1.0),
                })
            }
            KernelDef::Factorized { f, s, g } => Some(FactorizedKernel {
                f: f.to_fn(),
                s: s.to_fn(),
                g: g.to_fn(),
            }),
            KernelDef::Tabulated { .. } => None,
        }
    }

    /// The grid this definition is discretized on: tabulated definitions fix
    /// their own size, the others use `rule` with `m` nodes.
    pub fn grid(&self, rule: Rule, m: usize) -> Result<QuadratureGrid> {
        match self {
            KernelDef::Tabulated { values, rule } => QuadratureGrid::new(*rule, values.len()),
            _ => QuadratureGrid::new(rule, m),
        }
    }

    pub fn discretize(&self, grid: &QuadratureGrid) -> Result<NextGenMatrix> {
        match self {
            KernelDef::Tabulated { values, .. } => {
                if let Some(row) = values.iter().position(|r| r.len() != values.len()) {
                    return Err(Error::DimensionMismatch {
                        what: "tabulated kernel row",
                        expected: values.len(),
                        found: values[row].len(),
                    });
                }
                discretize_tabulated(&DenseMatrix::from_rows(values), grid)
            }
            _ => {
                if let Some(p) = self.graphon_sis() {
                    p.validate(grid)?;
                }
                discretize(&self.kernel().expect("pointwise family"), grid)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::spectral_radius_of;

    #[test]
    fn grids_have_unit_mass() {
        for g in [QuadratureGrid::midpoint(7).unwrap(), QuadratureGrid::trapezoid(9).unwrap()] {
            assert!((g.weights().iter().sum::<f64>() - 1.0).abs() < 1e-14);
            assert!(g.nodes().windows(2).all(|w| w[0] < w[1]));
            assert!(g.weights().iter().all(|w| *w > 0.0));
        }
        assert_eq!(QuadratureGrid::trapezoid(3).unwrap().weights(), &[0.25, 0.5, 0.25]);
    }

    #[test]
    fn constant_kernel_discretizes_to_c_over_m() {
        let g = QuadratureGrid::midpoint(8).unwrap();
        let m = discretize(&KernelSpec::constant(3.0), &g).unwrap();
        assert!(m.entries().as_slice().iter().all(|v| (*v - 3.0 / 8.0).abs() < 1e-15));
        assert!((spectral_radius_of(m.entries()).unwrap() - 3.0).abs() < 1e-12);
    }

    #[test]
    fn negative_kernel_values_are_rejected() {
        let g = QuadratureGrid::midpoint(4).unwrap();
        let k = KernelSpec::new("bad", |x, y| x - y);
        let err = discretize(&k, &g).unwrap_err();
        assert!(err.to_string().contains("(x, y)"), "{err}");
    }

    #[test]
    fn double_norm_of_constant_is_constant() {
        let g = QuadratureGrid::midpoint(16).unwrap();
        for p in [1.5, 2.0, 4.0] {
            assert!((double_norm(&KernelSpec::constant(1.0), p, &g).unwrap() - 1.0).abs() < 1e-14);
        }
        assert!(double_norm(&KernelSpec::constant(1.0), 1.0, &g).is_err());
    }

    #[test]
    fn configuration_re_trivial_cases() {
        let g = QuadratureGrid::midpoint(32).unwrap();
        let ck = ConfigurationKernel::new(|_| 1.0, |_| 1.0);
        assert!((configuration_re(&ck, &g, &Strategy::ones(32)).unwrap() - 1.0).abs() < 1e-14);
        assert_eq!(configuration_re(&ck, &g, &Strategy::zeros(32)).unwrap(), 0.0);
    }

    #[test]
    fn affine_f_gives_reciprocal_diagonal() {
        let g = QuadratureGrid::midpoint(10).unwrap();
        let fk = FactorizedKernel {
            f: Arc::new(|x| 1.0 + x),
            s: Arc::new(|_, _| 1.0),
            g: Arc::new(|_| 1.0),
        };
        let cert = kernel_symmetrizability_check(&fk, &g).unwrap();
        let x0 = g.nodes()[0];
        for (d, x) in cert.d.iter().zip(g.nodes()) {
            assert!((d - (1.0 + x0) / (1.0 + x)).abs() < 1e-12);
        }
    }

    #[test]
    fn asymmetric_core_is_inconsistent() {
        let g = QuadratureGrid::midpoint(6).unwrap();
        let fk = FactorizedKernel {
            f: Arc::new(|_| 1.0),
            s: Arc::new(|x, y| 1.0 + x * x * y),
            g: Arc::new(|_| 1.0),
        };
        assert!(matches!(kernel_symmetrizability_check(&fk, &g), Err(Error::Inconsistent(_))));
    }

    #[test]
    fn json_definitions_parse() {
        let def = KernelDef::from_json_str(
            r#"{"family":"graphon-sis","beta":1,"graphon":{"kind":"product"},"theta":{"kind":"affine","intercept":1,"slope":1},"gamma":2}"#,
        )
        .unwrap();
        let k = def.kernel().unwrap();
        assert!((k.evaluate(0.5, 0.5) - 0.25 * 1.5 / 2.0).abs() < 1e-15);
        assert!(def.factorized().is_some());

        let tab = KernelDef::from_json_str(r#"{"family":"tabulated","values":[[1,2],[2,1]]}"#).unwrap();
        let grid = tab.grid(Rule::Trapezoid, 99).unwrap();
        assert_eq!(grid.len(), 2);
        assert_eq!(grid.rule(), Rule::Midpoint);
        let m = tab.discretize(&grid).unwrap();
        assert_eq!(m.entries().to_rows(), vec![vec![0.5, 1.0], vec![1.0, 0.5]]);

        assert!(KernelDef::from_json_str(r#"{"family":"nope"}"#).is_err());
    }

    #[test]
    fn asymmetric_graphon_is_rejected() {
        let p = GraphonSisParams {
            beta: Arc::new(|_| 1.0),
            w: Arc::new(|x, _| x),
            theta: Arc::new(|_| 1.0),
            gamma: Arc::new(|_| 1.0),
        };
        assert!(p.validate(&QuadratureGrid::midpoint(4).unwrap()).is_err());
    }
}
