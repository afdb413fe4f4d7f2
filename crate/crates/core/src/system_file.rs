//! JSON system files.
//!
//! ```json
//! { "n": 2, "d": 1, "A": [0.0, 0.0, 1.0, 0.0], "B": [1.0, 0.0], "C": [1.0, 0.5] }
//! { "n": 2, "d": 1, "thetas": [1.2, 0.4] }
//! ```
//!
//! Matrices are row-major, either flat or as nested rows. Exactly one of
//! `{A, B}` or `thetas` must be present; `C` (p×n) is optional. Other keys
//! (such as an emitted `diagnostics` block) are ignored on input.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hin::AngleVector;
use crate::linalg::Matrix;
use crate::pair::InputPair;

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum MatrixData {
    Flat(Vec<f64>),
    Nested(Vec<Vec<f64>>),
}

impl MatrixData {
    fn into_matrix(self, name: &str, rows: Option<usize>, cols: usize) -> Result<Matrix> {
        let (flat, nested_rows) = match self {
            MatrixData::Flat(v) => (v, None),
            MatrixData::Nested(rs) => {
                if let Some(bad) = rs.iter().position(|r| r.len() != cols) {
                    return Err(Error::DimensionMismatch(format!(
                        "{name} row {bad} has length {}, expected {cols}",
                        rs[bad].len()
                    )));
                }
                let count = rs.len();
                (rs.into_iter().flatten().collect(), Some(count))
            }
        };
        let rows = match (rows, nested_rows) {
            (Some(r), _) => r,
            (None, Some(r)) => r,
            (None, None) => {
                if cols == 0 || flat.len() % cols != 0 || flat.is_empty() {
                    return Err(Error::DimensionMismatch(format!(
                        "{name} has {} entries, not a positive multiple of {cols}",
                        flat.len()
                    )));
                }
                flat.len() / cols
            }
        };
        if rows == 0 {
            return Err(Error::DimensionMismatch(format!("{name} has no rows")));
        }
        Matrix::from_row_major(rows, cols, flat)
            .map_err(|e| Error::InvalidArgument(format!("{name}: {e}")))
    }
}

#[derive(Debug, Deserialize)]
struct RawSystemFile {
    n: usize,
    d: usize,
    #[serde(rename = "A")]
    a: Option<MatrixData>,
    #[serde(rename = "B")]
    b: Option<MatrixData>,
    thetas: Option<Vec<f64>>,
    #[serde(rename = "C")]
    c: Option<MatrixData>,
}

/// The system described by a file: explicit matrices or angles.
#[derive(Debug, Clone, PartialEq)]
pub enum SystemContent {
    Pair(InputPair),
    Angles(AngleVector),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SystemFile {
    pub n: usize,
    pub d: usize,
    pub content: SystemContent,
    pub c: Option<Matrix>,
}

impl SystemFile {
    pub fn parse(text: &str) -> Result<Self> {
        let raw: RawSystemFile =
            serde_json::from_str(text).map_err(|e| Error::InvalidArgument(e.to_string()))?;
        let (n, d) = (raw.n, raw.d);
        if n == 0 || d == 0 {
            return Err(Error::DimensionMismatch(format!(
                "n = {n}, d = {d} must be positive"
            )));
        }
        let content = match (raw.a, raw.b, raw.thetas) {
            (Some(a), Some(b), None) => {
                let a = a.into_matrix("A", Some(n), n)?;
                let b = b.into_matrix("B", Some(n), d)?;
                SystemContent::Pair(InputPair::new(a, b)?)
            }
            (None, None, Some(thetas)) => SystemContent::Angles(AngleVector::new(n, d, thetas)?),
            _ => {
                return Err(Error::InvalidArgument(
                    "exactly one of {A, B} or thetas must be present".into(),
                ))
            }
        };
        let c = raw.c.map(|c| c.into_matrix("C", None, n)).transpose()?;
        Ok(Self { n, d, content, c })
    }

    pub fn from_pair(pair: InputPair, c: Option<Matrix>) -> Self {
        Self {
            n: pair.n(),
            d: pair.d(),
            content: SystemContent::Pair(pair),
            c,
        }
    }

    pub fn from_angles(angles: AngleVector, c: Option<Matrix>) -> Self {
        Self {
            n: angles.n(),
            d: angles.d(),
            content: SystemContent::Angles(angles),
            c,
        }
    }

    /// Serializable form; `diagnostics` is attached verbatim when given.
    pub fn to_json(&self, diagnostics: Option<serde_json::Value>) -> serde_json::Value {
        let (a, b, thetas) = match &self.content {
            SystemContent::Pair(p) => (
                Some(p.a.as_slice().to_vec()),
                Some(p.b.as_slice().to_vec()),
                None,
            ),
            SystemContent::Angles(t) => (None, None, Some(t.thetas().to_vec())),
        };
        let out = OutFile {
            n: self.n,
            d: self.d,
            a,
            b,
            thetas,
            c: self.c.as_ref().map(|c| c.as_slice().to_vec()),
            diagnostics,
        };
        serde_json::to_value(out).expect("finite values serialize")
    }

    pub fn to_json_string(&self, diagnostics: Option<serde_json::Value>) -> String {
        serde_json::to_string_pretty(&self.to_json(diagnostics)).expect("serializable")
    }
}

#[derive(Serialize)]
struct OutFile {
    n: usize,
    d: usize,
    #[serde(rename = "A", skip_serializing_if = "Option::is_none")]
    a: Option<Vec<f64>>,
    #[serde(rename = "B", skip_serializing_if = "Option::is_none")]
    b: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    thetas: Option<Vec<f64>>,
    #[serde(rename = "C", skip_serializing_if = "Option::is_none")]
    c: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    diagnostics: Option<serde_json::Value>,
}

/// Parse a square matrix given either as a comma-separated diagonal
/// (`"100,1,0.01,1"`) or as JSON nested rows.
pub fn parse_square_matrix(text: &str, n: usize) -> Result<Matrix> {
    let trimmed = text.trim();
    let m = if trimmed.starts_with('[') {
        let rows: Vec<Vec<f64>> =
            serde_json::from_str(trimmed).map_err(|e| Error::InvalidArgument(e.to_string()))?;
        MatrixData::Nested(rows).into_matrix("transform", Some(n), n)?
    } else {
        let diag = trimmed
            .split(',')
            .map(|s| s.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::InvalidArgument(format!("transform diagonal: {e}")))?;
        if diag.len() != n || diag.iter().any(|v| !v.is_finite()) {
            return Err(Error::DimensionMismatch(format!(
                "transform diagonal needs {n} finite entries, got {}",
                diag.len()
            )));
        }
        Matrix::from_diagonal(&diag)
    };
    Ok(m)
}
