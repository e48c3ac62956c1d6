use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Map, Value};

use re_kit::frobenius::{atomic_decomposition, is_monatomic};
use re_kit::kernels::{double_norm, kernel_symmetrizability_check, KernelDef, Rule, DEFAULT_GRID_SIZE};
use re_kit::linalg::spectrum::DEFAULT_RESIDUAL_TOL;
use re_kit::linalg::{inertia, spectral_radius_of};
use re_kit::matrix::parse_csv_rows;
use re_kit::optimize::{minimize_re, BudgetProblem};
use re_kit::shape::{classify_shape_with, plane_surface, Classification, ClassifyOptions};
use re_kit::symmetrize::{symmetrize, DEFAULT_SUPPORT_TOL};
use re_kit::{fixtures, Error, NextGenMatrix, Strategy, SCHEMA_VERSION};

mod selftest;

#[derive(Parser)]
#[command(name = "re-kit", version, about = "Effective reproduction number analysis for next-generation matrices")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Which {
    Conv,
    Conc,
}

#[derive(Clone, Copy, ValueEnum)]
enum RuleArg {
    Midpoint,
    Trapezoid,
}

#[derive(Subcommand)]
enum Command {
    /// Clustered spectrum and inertia of K.
    Spectrum {
        /// Matrix file (JSON or CSV) or `builtin:<name>`.
        #[arg(long)]
        matrix: String,
        #[arg(long, default_value_t = DEFAULT_RESIDUAL_TOL)]
        tol: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// R_e(η) and the effective spectrum.
    Re {
        #[arg(long)]
        matrix: String,
        /// Strategy file, or `ones` / `zeros`.
        #[arg(long)]
        eta: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Convexity/concavity certificate or sampled violation.
    Classify {
        #[arg(long)]
        matrix: String,
        #[arg(long, default_value_t = 10_000)]
        samples: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Exit with status 3 when a violation is found.
        #[arg(long)]
        strict: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Frobenius decomposition into atoms.
    Decompose {
        #[arg(long)]
        matrix: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Diagonal symmetrization certificate or obstruction.
    Symmetrize {
        #[arg(long)]
        matrix: String,
        #[arg(long, default_value_t = DEFAULT_SUPPORT_TOL)]
        tol: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Minimize R_e under a linear vaccination budget.
    Optimize {
        #[arg(long)]
        matrix: String,
        #[arg(long)]
        budget: f64,
        /// Cost weights as a JSON array or one CSV row (defaults to the matrix weights).
        #[arg(long)]
        costs: Option<PathBuf>,
        #[arg(long, default_value_t = 1000)]
        max_iter: u64,
        #[arg(long, default_value_t = 10_000)]
        samples: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Discretize a kernel definition and summarize it.
    Kernel {
        /// JSON kernel definition or CSV table of kernel values.
        #[arg(long)]
        kernel: PathBuf,
        #[arg(long, default_value_t = DEFAULT_GRID_SIZE)]
        grid: usize,
        #[arg(long, value_enum, default_value = "midpoint")]
        rule: RuleArg,
        /// Also write the discretized matrix as JSON to this path.
        #[arg(long)]
        matrix_out: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// CSV of R_e over the plane η₁+η₂+η₃ = 1/3 for a bundled counterexample.
    DemoCounterexample {
        #[arg(long, value_enum)]
        which: Which,
        #[arg(long, default_value_t = 200)]
        grid: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Runs the built-in invariant suite.
    Selftest {
        #[arg(long, default_value_t = 2000)]
        samples: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        strict: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

enum Failure {
    Core(Error),
    Io(String),
    Violation(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

type CliResult<T> = std::result::Result<T, Failure>;

fn load_matrix(spec: &str) -> CliResult<NextGenMatrix> {
    if let Some(name) = spec.strip_prefix("builtin:") {
        return fixtures::by_name(name).ok_or_else(|| {
            Failure::Core(Error::InvalidInput(format!(
                "unknown builtin matrix {name:?}; available: {}",
                fixtures::NAMES.join(", ")
            )))
        });
    }
    Ok(NextGenMatrix::load(spec)?)
}

fn load_strategy(spec: &str, n: usize) -> CliResult<Strategy> {
    match spec {
        "ones" => Ok(Strategy::ones(n)),
        "zeros" => Ok(Strategy::zeros(n)),
        path => Ok(Strategy::load(path)?),
    }
}

fn load_costs(path: &Path) -> CliResult<Vec<f64>> {
    let text = fs::read_to_string(path).map_err(|e| Failure::Io(format!("cannot read {}: {e}", path.display())))?;
    if text.trim_start().starts_with('[') {
        return serde_json::from_str(&text).map_err(|e| {
            Failure::Core(Error::Parse {
                line: e.line(),
                column: e.column(),
                message: e.to_string(),
            })
        });
    }
    Ok(parse_csv_rows(&text)?.into_iter().flatten().collect())
}

/// Wraps a report with the schema version and command name.
fn envelope(command: &str, report: impl Serialize) -> Value {
    let mut map = Map::new();
    map.insert("schema_version".into(), json!(SCHEMA_VERSION));
    map.insert("command".into(), json!(command));
    match serde_json::to_value(report).expect("reports serialize") {
        Value::Object(fields) => map.extend(fields),
        other => {
            map.insert("report".into(), other);
        }
    }
    Value::Object(map)
}

fn emit_text(text: &str, out: Option<&Path>) -> CliResult<()> {
    match out {
        Some(path) => fs::write(path, text).map_err(|e| Failure::Io(format!("cannot write {}: {e}", path.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn emit(value: &Value, out: Option<&Path>) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value).expect("JSON values serialize");
    text.push('\n');
    emit_text(&text, out)
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Spectrum { matrix, tol, out } => {
            let m = load_matrix(&matrix)?;
            let spec = re_kit::spectrum(&m, tol)?;
            let inertia = inertia(&spec, spec.default_zero_band())?;
            let report = json!({
                "spectral_radius": spec.radius(),
                "spectrum": spec,
                "inertia": inertia,
            });
            emit(&envelope("spectrum", report), out.as_deref())
        }
        Command::Re { matrix, eta, out } => {
            let m = load_matrix(&matrix)?;
            let eta = load_strategy(&eta, m.n())?;
            let report = re_kit::re::re(&m, &eta)?;
            emit(&envelope("re", report), out.as_deref())
        }
        Command::Classify {
            matrix,
            samples,
            seed,
            strict,
            out,
        } => {
            let m = load_matrix(&matrix)?;
            let verdict = classify_shape_with(
                &m,
                &ClassifyOptions {
                    samples,
                    seed,
                    margin: None,
                },
            )?;
            emit(&envelope("classify", &verdict), out.as_deref())?;
            if strict && verdict.classification == Classification::ViolationFound {
                return Err(Failure::Violation("shape violation found".into()));
            }
            Ok(())
        }
        Command::Decompose { matrix, out } => {
            let m = load_matrix(&matrix)?;
            let dec = atomic_decomposition(&m)?;
            let evidence = is_monatomic(&m)?;
            let report = json!({
                "components": dec.components,
                "nonzero_atoms": dec.nonzero_atoms,
                "block_radii": dec.block_radii,
                "residual": dec.residual,
                "monatomic": evidence.monatomic,
                "monatomic_evidence": evidence,
            });
            emit(&envelope("decompose", report), out.as_deref())
        }
        Command::Symmetrize { matrix, tol, out } => {
            let m = load_matrix(&matrix)?;
            emit(&envelope("symmetrize", symmetrize(&m, tol)?), out.as_deref())
        }
        Command::Optimize {
            matrix,
            budget,
            costs,
            max_iter,
            samples,
            seed,
            out,
        } => {
            let m = load_matrix(&matrix)?;
            let costs = costs.as_deref().map(load_costs).transpose()?;
            let problem = BudgetProblem::new(m.clone(), costs, budget)?;
            let verdict = classify_shape_with(
                &m,
                &ClassifyOptions {
                    samples,
                    seed,
                    margin: None,
                },
            )?;
            let result = minimize_re(&problem, &verdict, max_iter, seed)?;
            emit(&envelope("optimize", result), out.as_deref())
        }
        Command::Kernel {
            kernel,
            grid,
            rule,
            matrix_out,
            out,
        } => {
            let def = KernelDef::load(&kernel)?;
            let rule = match rule {
                RuleArg::Midpoint => Rule::Midpoint,
                RuleArg::Trapezoid => Rule::Trapezoid,
            };
            let grid = def.grid(rule, grid)?;
            let m = def.discretize(&grid)?;
            let r0 = spectral_radius_of(m.entries())?;
            let mut report = json!({
                "family": family_name(&def),
                "measure": "probability measure on [0,1]",
                "grid": { "rule": grid.rule(), "m": grid.len() },
                "r0": r0,
            });
            if let Some(k) = def.kernel() {
                report["description"] = json!(k.description());
                report["double_norm_p2"] = json!(double_norm(&k, 2.0, &grid)?);
            }
            report["symmetrization"] = match def.factorized() {
                Some(fk) => match kernel_symmetrizability_check(&fk, &grid) {
                    Ok(cert) => json!({ "status": "certified", "d": cert.d, "residual": cert.residual }),
                    Err(Error::Precondition(msg)) => json!({ "status": "not-checked", "reason": msg }),
                    Err(e) => return Err(e.into()),
                },
                None => serde_json::to_value(symmetrize(&m, DEFAULT_SUPPORT_TOL)?).expect("serializes"),
            };
            if let Some(path) = matrix_out {
                emit_text(&format!("{}\n", m.to_json()), Some(&path))?;
            }
            emit(&envelope("kernel", report), out.as_deref())
        }
        Command::DemoCounterexample { which, grid, out } => {
            let (name, m) = match which {
                Which::Conv => ("counter-convex", fixtures::counter_convex()),
                Which::Conc => ("counter-concave", fixtures::counter_concave()),
            };
            let surface = plane_surface(&m, grid)?;
            emit_text(&surface.to_csv(), out.as_deref())?;
            let summary = json!({
                "matrix": name,
                "grid": grid,
                "points": surface.points.len(),
                "convexity_violation": surface.convexity,
                "concavity_violation": surface.concavity,
            });
            eprintln!("{}", serde_json::to_string(&envelope("demo-counterexample", summary)).expect("serializes"));
            Ok(())
        }
        Command::Selftest {
            samples,
            seed,
            strict,
            out,
        } => {
            let report = selftest::run(samples, seed);
            let passed = report.passed;
            emit(&envelope("selftest", report), out.as_deref())?;
            if strict && !passed {
                return Err(Failure::Violation("selftest failed".into()));
            }
            Ok(())
        }
    }
}

fn family_name(def: &KernelDef) -> &'static str {
    match def {
        KernelDef::GraphonSis { .. } => "graphon-sis",
        KernelDef::Configuration { .. } => "configuration",
        KernelDef::Constant { .. } => "constant",
        KernelDef::Factorized { .. } => "factorized",
        KernelDef::Tabulated { .. } => "tabulated",
    }
}

fn configure_threads() {
    if let Some(n) = std::env::var("RE_KIT_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        if n > 0 {
            // fails only if a pool already exists, which cannot happen this early
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            // usage errors are input errors; --help and --version are not errors
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    configure_threads();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Core(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numerical() { 2 } else { 1 })
        }
        Err(Failure::Io(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Violation(msg)) => {
            eprintln!("{msg}");
            ExitCode::from(3)
        }
    }
}
