//! Nonnegative next-generation matrices and vaccination strategies.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;

/// An `n×n` nonnegative matrix together with positive quadrature weights
/// (the reference measure; all ones unless the matrix came from a kernel).
#[derive(Debug, Clone, PartialEq)]
pub struct NextGenMatrix {
    entries: DenseMatrix,
    weights: Vec<f64>,
}

impl NextGenMatrix {
    pub fn new(entries: DenseMatrix, weights: Option<Vec<f64>>) -> Result<Self> {
        let n = entries.n();
        if n == 0 {
            return Err(Error::InvalidInput("matrix dimension must be at least 1".into()));
        }
        for i in 0..n {
            for j in 0..n {
                let x = entries[(i, j)];
                if !x.is_finite() || x < 0.0 {
                    return Err(Error::InvalidInput(format!(
                        "entry ({i}, {j}) = {x} is not a finite nonnegative number"
                    )));
                }
            }
        }
        let weights = weights.unwrap_or_else(|| vec![1.0; n]);
        if weights.len() != n {
            return Err(Error::DimensionMismatch {
                what: "weights",
                expected: n,
                found: weights.len(),
            });
        }
        if let Some(i) = weights.iter().position(|w| !(w.is_finite() && *w > 0.0)) {
            return Err(Error::InvalidInput(format!(
                "weight {i} = {} is not finite and positive",
                weights[i]
            )));
        }
        Ok(Self { entries, weights })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let n = rows.len();
        if let Some(bad) = rows.iter().position(|r| r.as_ref().len() != n) {
            return Err(Error::DimensionMismatch {
                what: "matrix row",
                expected: n,
                found: rows[bad].as_ref().len(),
            });
        }
        Self::new(DenseMatrix::from_rows(rows), None)
    }

    pub fn with_weights(self, weights: Vec<f64>) -> Result<Self> {
        Self::new(self.entries, Some(weights))
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.entries.n()
    }

    pub fn entries(&self) -> &DenseMatrix {
        &self.entries
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[(i, j)]
    }

    pub fn max_entry(&self) -> f64 {
        self.entries.max_abs()
    }

    pub fn transpose(&self) -> Self {
        Self {
            entries: self.entries.transpose(),
            weights: self.weights.clone(),
        }
    }

    /// `K · Diag(eta)`.
    pub fn column_scaled(&self, eta: &[f64]) -> DenseMatrix {
        self.entries.scale_columns(eta)
    }

    /// Same weights, new entries.
    pub fn map_entries(&self, entries: DenseMatrix) -> Result<Self> {
        Self::new(entries, Some(self.weights.clone()))
    }

    pub fn to_file_format(&self) -> MatrixFile {
        MatrixFile {
            n: self.n(),
            entries: Entries::Flat(self.entries.as_slice().to_vec()),
            weights: if self.weights.iter().all(|w| *w == 1.0) {
                None
            } else {
                Some(self.weights.clone())
            },
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.to_file_format()).expect("matrix serialises")
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let file: MatrixFile = serde_json::from_str(text).map_err(json_error)?;
        file.into_matrix()
    }

    /// One row per line, comma separated. Lines starting with `#` are skipped.
    pub fn from_csv_str(text: &str) -> Result<Self> {
        let rows = parse_csv_rows(text)?;
        Self::from_rows(&rows)
    }

    /// Reads JSON or CSV, chosen by extension (`.json`) or by a leading `{`.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::InvalidInput(format!("cannot read {}: {e}", path.display())))?;
        let is_json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"))
            || text.trim_start().starts_with('{');
        if is_json {
            Self::from_json_str(&text)
        } else {
            Self::from_csv_str(&text)
        }
    }
}

/// On-disk JSON layout: `{"n": 3, "entries": [...], "weights": [...]}`.
/// `entries` may be flat row-major or nested rows.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MatrixFile {
    pub n: usize,
    pub entries: Entries,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Entries {
    Flat(Vec<f64>),
    Nested(Vec<Vec<f64>>),
}

impl MatrixFile {
    pub fn into_matrix(self) -> Result<NextGenMatrix> {
        let n = self.n;
        let flat = match self.entries {
            Entries::Flat(v) => v,
            Entries::Nested(rows) => {
                if rows.len() != n {
                    return Err(Error::DimensionMismatch {
                        what: "entries rows",
                        expected: n,
                        found: rows.len(),
                    });
                }
                let mut flat = Vec::with_capacity(n * n);
                for row in rows {
                    if row.len() != n {
                        return Err(Error::DimensionMismatch {
                            what: "entries row",
                            expected: n,
                            found: row.len(),
                        });
                    }
                    flat.extend(row);
                }
                flat
            }
        };
        if flat.len() != n * n {
            return Err(Error::DimensionMismatch {
                what: "entries",
                expected: n * n,
                found: flat.len(),
            });
        }
        NextGenMatrix::new(DenseMatrix::new(n, flat), self.weights)
    }
}

pub(crate) fn json_error(e: serde_json::Error) -> Error {
    Error::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    }
}

/// Numeric CSV rows; comment lines (`#`) and blank lines are skipped.
pub fn parse_csv_rows(text: &str) -> Result<Vec<Vec<f64>>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            Error::Parse {
                line,
                column: 0,
                message: e.to_string(),
            }
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        if record.iter().all(|f| f.is_empty()) {
            continue;
        }
        let mut row = Vec::with_capacity(record.len());
        for (col, field) in record.iter().enumerate() {
            let x: f64 = field.parse().map_err(|_| Error::Parse {
                line,
                column: col + 1,
                message: format!("not a number: {field:?}"),
            })?;
            row.push(x);
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::Parse {
            line: 1,
            column: 1,
            message: "no rows".into(),
        });
    }
    Ok(rows)
}

/// A vaccination strategy: fraction of each group left unvaccinated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Strategy(Vec<f64>);

impl Strategy {
    pub fn new(eta: Vec<f64>) -> Result<Self> {
        if let Some(i) = eta.iter().position(|x| !(0.0..=1.0).contains(x)) {
            return Err(Error::InvalidInput(format!(
                "strategy entry {i} = {} lies outside [0, 1]",
                eta[i]
            )));
        }
        Ok(Self(eta))
    }

    /// Clamps each entry into `[0, 1]`; NaN becomes 0.
    pub fn clamped(eta: Vec<f64>) -> Self {
        Self(
            eta.into_iter()
                .map(|x| if x.is_nan() { 0.0 } else { x.clamp(0.0, 1.0) })
                .collect(),
        )
    }

    pub fn ones(n: usize) -> Self {
        Self(vec![1.0; n])
    }

    pub fn zeros(n: usize) -> Self {
        Self(vec![0.0; n])
    }

    /// Indicator of `indices`.
    pub fn indicator(n: usize, indices: &[usize]) -> Self {
        let mut v = vec![0.0; n];
        for &i in indices {
            v[i] = 1.0;
        }
        Self(v)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    /// `θ·self + (1−θ)·other`.
    pub fn mix(&self, other: &Strategy, theta: f64) -> Strategy {
        Strategy::clamped(
            self.0
                .iter()
                .zip(&other.0)
                .map(|(a, b)| theta * a + (1.0 - theta) * b)
                .collect(),
        )
    }

    pub fn scaled(&self, lambda: f64) -> Strategy {
        Strategy::clamped(self.0.iter().map(|x| lambda * x).collect())
    }

    /// Accepts a bare JSON array or `{"eta": [...]}`.
    pub fn from_json_str(text: &str) -> Result<Self> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Form {
            Bare(Vec<f64>),
            Wrapped { eta: Vec<f64> },
        }
        let form: Form = serde_json::from_str(text).map_err(json_error)?;
        let v = match form {
            Form::Bare(v) | Form::Wrapped { eta: v } => v,
        };
        Self::new(v)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::InvalidInput(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json_str(&text)
    }
}

impl TryFrom<Vec<f64>> for Strategy {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Strategy::new(v)
    }
}

impl From<Strategy> for Vec<f64> {
    fn from(s: Strategy) -> Self {
        s.0
    }
}

impl AsRef<[f64]> for Strategy {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_negative_and_non_finite_entries() {
        assert!(NextGenMatrix::from_rows(&[[1.0, -1.0], [0.0, 1.0]]).is_err());
        assert!(NextGenMatrix::from_rows(&[[1.0, f64::INFINITY], [0.0, 1.0]]).is_err());
        assert!(NextGenMatrix::from_rows(&[[1.0, 0.0], [0.0, 1.0]])
            .unwrap()
            .with_weights(vec![1.0, 0.0])
            .is_err());
        let empty: [[f64; 0]; 0] = [];
        assert!(NextGenMatrix::from_rows(&empty).is_err());
    }

    #[test]
    fn json_flat_and_nested_agree() {
        let a = NextGenMatrix::from_json_str(r#"{"n":2,"entries":[0,2,8,0]}"#).unwrap();
        let b = NextGenMatrix::from_json_str(r#"{"n":2,"entries":[[0,2],[8,0]],"weights":[1,1]}"#).unwrap();
        assert_eq!(a, b);
        assert_eq!(NextGenMatrix::from_json_str(&a.to_json()).unwrap(), a);
    }

    #[test]
    fn json_errors_carry_position() {
        match NextGenMatrix::from_json_str("{\"n\": 2,\n \"entries\": [1, 2,, 3]}") {
            Err(Error::Parse { line, column, .. }) => {
                assert_eq!(line, 2);
                assert!(column > 0);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn csv_parses_and_reports_bad_field() {
        let m = NextGenMatrix::from_csv_str("# comment\n1, 2\n3, 4\n").unwrap();
        assert_eq!(m.get(1, 0), 3.0);
        match NextGenMatrix::from_csv_str("1,2\n3,x\n") {
            Err(Error::Parse { line, column, .. }) => assert_eq!((line, column), (2, 2)),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn strategy_bounds_and_forms() {
        assert!(Strategy::new(vec![0.0, 1.0]).is_ok());
        assert!(Strategy::new(vec![1.5]).is_err());
        assert_eq!(Strategy::from_json_str("[0.5, 1]").unwrap().as_slice(), &[0.5, 1.0]);
        assert_eq!(Strategy::from_json_str(r#"{"eta":[0]}"#).unwrap().as_slice(), &[0.0]);
    }
}
