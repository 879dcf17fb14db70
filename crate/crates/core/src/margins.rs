//! Margins, weights and the JSON problem file.
//!
//! A problem file looks like
//!
//! ```json
//! {"rows": [220, 215, 93, 64], "cols": [108, 286, 71, 127], "label": "4x4"}
//! ```
//!
//! with an optional row-major `"weights"` matrix. Absent weights mean the
//! all-ones matrix, for which the weighted count is the plain table count.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::matrix::Matrix;
use crate::{Error, Result};

/// Relaxations used only by the exact oracles.
#[derive(Clone, Copy, Debug, Default)]
pub struct MarginOptions {
    /// Permit `m = 1`, `n = 1` and zero entries.
    pub allow_degenerate: bool,
}

/// Row sums `R` and column sums `C` with common total `N`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct MarginPair {
    rows: Vec<u64>,
    cols: Vec<u64>,
    total: u64,
}

/// Validates margins under the default rules: `m, n ≥ 2` and positive entries.
pub fn validate_margins(rows: &[i64], cols: &[i64]) -> Result<MarginPair> {
    validate_margins_with(rows, cols, MarginOptions::default())
}

pub fn validate_margins_with(rows: &[i64], cols: &[i64], opts: MarginOptions) -> Result<MarginPair> {
    let (min_len, min_entry) = if opts.allow_degenerate { (1, 0) } else { (2, 1) };
    let convert = |side: &'static str, v: &[i64]| -> Result<Vec<u64>> {
        v.iter()
            .enumerate()
            .map(|(index, &value)| {
                if value < min_entry {
                    Err(Error::NonPositive { side, index, value })
                } else {
                    Ok(value as u64)
                }
            })
            .collect()
    };
    let rows = convert("row", rows)?;
    let cols = convert("column", cols)?;
    if rows.len() < min_len || cols.len() < min_len {
        return Err(Error::Degenerate {
            m: rows.len(),
            n: cols.len(),
        });
    }
    let rsum: u128 = rows.iter().map(|&r| r as u128).sum();
    let csum: u128 = cols.iter().map(|&c| c as u128).sum();
    if rsum != csum {
        return Err(Error::SumMismatch {
            rows: rsum,
            cols: csum,
        });
    }
    let total = u64::try_from(rsum).map_err(|_| Error::Overflow(format!("total {rsum}")))?;
    Ok(MarginPair { rows, cols, total })
}

impl MarginPair {
    /// Builds margins from unsigned vectors under the default rules.
    pub fn new(rows: &[u64], cols: &[u64]) -> Result<Self> {
        Self::with_options(rows, cols, MarginOptions::default())
    }

    pub fn with_options(rows: &[u64], cols: &[u64], opts: MarginOptions) -> Result<Self> {
        let to_i64 = |v: &[u64]| -> Result<Vec<i64>> {
            v.iter()
                .map(|&x| i64::try_from(x).map_err(|_| Error::Overflow(format!("margin {x}"))))
                .collect()
        };
        validate_margins_with(&to_i64(rows)?, &to_i64(cols)?, opts)
    }

    pub fn rows(&self) -> &[u64] {
        &self.rows
    }

    pub fn cols(&self) -> &[u64] {
        &self.cols
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn m(&self) -> usize {
        self.rows.len()
    }

    pub fn n(&self) -> usize {
        self.cols.len()
    }

    pub fn rows_f64(&self) -> Vec<f64> {
        self.rows.iter().map(|&r| r as f64).collect()
    }

    pub fn cols_f64(&self) -> Vec<f64> {
        self.cols.iter().map(|&c| c as f64).collect()
    }

    /// Dimension `(m-1)(n-1)` of the transportation polytope.
    pub fn polytope_dim(&self) -> usize {
        (self.m() - 1) * (self.n() - 1)
    }

    /// Swaps the roles of rows and columns.
    pub fn transpose(&self) -> Self {
        Self {
            rows: self.cols.clone(),
            cols: self.rows.clone(),
            total: self.total,
        }
    }

    /// Multiplies every margin by `t`.
    pub fn dilate(&self, t: u64) -> Result<Self> {
        let scale = |v: &[u64]| -> Result<Vec<u64>> {
            v.iter()
                .map(|&x| x.checked_mul(t).ok_or_else(|| Error::Overflow(format!("{x} * {t}"))))
                .collect()
        };
        let total = self
            .total
            .checked_mul(t)
            .ok_or_else(|| Error::Overflow(format!("{} * {t}", self.total)))?;
        Ok(Self {
            rows: scale(&self.rows)?,
            cols: scale(&self.cols)?,
            total,
        })
    }

    /// True when all row sums are equal.
    pub fn rows_constant(&self) -> bool {
        self.rows.windows(2).all(|w| w[0] == w[1])
    }

    /// True when all column sums are equal.
    pub fn cols_constant(&self) -> bool {
        self.cols.windows(2).all(|w| w[0] == w[1])
    }
}

/// Clone margins: each `k·r_i` repeated `k` times, likewise for the columns.
pub fn clone_margins(margins: &MarginPair, k: u64) -> Result<MarginPair> {
    if k == 0 {
        return Err(Error::InvalidDimension("clone factor must be at least 1".into()));
    }
    let total = (k as u128 * k as u128)
        .checked_mul(margins.total as u128)
        .and_then(|t| u64::try_from(t).ok())
        .ok_or_else(|| Error::Overflow(format!("{k}^2 * {}", margins.total)))?;
    let repeat = |v: &[u64]| -> Vec<u64> {
        v.iter()
            .flat_map(|&x| std::iter::repeat_n(x * k, k as usize))
            .collect()
    };
    Ok(MarginPair {
        rows: repeat(&margins.rows),
        cols: repeat(&margins.cols),
        total,
    })
}

/// Nonnegative `m × n` weights.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Matrix", into = "Matrix")]
pub struct WeightMatrix(Matrix);

impl WeightMatrix {
    pub fn new(entries: Matrix) -> Result<Self> {
        for i in 0..entries.nrows() {
            for j in 0..entries.ncols() {
                let w = entries[(i, j)];
                if !w.is_finite() {
                    return Err(Error::DomainViolation(format!("weight ({i}, {j}) is not finite")));
                }
                if w < 0.0 {
                    return Err(Error::NegativeEntry { row: i, col: j, value: w });
                }
            }
        }
        Ok(Self(entries))
    }

    pub fn ones(m: usize, n: usize) -> Self {
        Self(Matrix::filled(m, n, 1.0))
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        Self::new(Matrix::from_rows(rows)?)
    }

    pub fn entries(&self) -> &Matrix {
        &self.0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0[(i, j)]
    }

    pub fn strictly_positive(&self) -> bool {
        self.0.as_slice().iter().all(|&w| w > 0.0)
    }

    /// First zero entry in row-major order.
    pub fn first_zero(&self) -> Option<(usize, usize)> {
        let n = self.0.ncols();
        self.0.as_slice().iter().position(|&w| w == 0.0).map(|k| (k / n, k % n))
    }

    pub fn is_zero_one(&self) -> bool {
        self.0.as_slice().iter().all(|&w| w == 0.0 || w == 1.0)
    }

    pub fn is_all_ones(&self) -> bool {
        self.0.as_slice().iter().all(|&w| w == 1.0)
    }

    pub fn transpose(&self) -> Self {
        Self(self.0.transpose())
    }

    /// Errors unless the matrix is `m × n` for the given margins.
    pub fn check_dims(&self, margins: &MarginPair) -> Result<()> {
        if self.0.nrows() != margins.m() || self.0.ncols() != margins.n() {
            return Err(Error::DimensionMismatch {
                expected: format!("{}x{}", margins.m(), margins.n()),
                got: format!("{}x{}", self.0.nrows(), self.0.ncols()),
            });
        }
        Ok(())
    }
}

impl TryFrom<Matrix> for WeightMatrix {
    type Error = Error;

    fn try_from(m: Matrix) -> Result<Self> {
        Self::new(m)
    }
}

impl From<WeightMatrix> for Matrix {
    fn from(w: WeightMatrix) -> Matrix {
        w.0
    }
}

/// A parsed problem file.
#[derive(Clone, Debug, PartialEq)]
pub struct ProblemSpec {
    pub margins: MarginPair,
    pub weights: Option<WeightMatrix>,
    pub metadata: BTreeMap<String, String>,
}

impl ProblemSpec {
    pub fn new(margins: MarginPair) -> Self {
        Self {
            margins,
            weights: None,
            metadata: BTreeMap::new(),
        }
    }

    /// Explicit weights, or the all-ones matrix when none were given.
    pub fn weights_or_ones(&self) -> WeightMatrix {
        self.weights
            .clone()
            .unwrap_or_else(|| WeightMatrix::ones(self.margins.m(), self.margins.n()))
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawProblem {
    rows: Vec<i64>,
    cols: Vec<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    weights: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    label: Option<String>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    metadata: BTreeMap<String, String>,
}

/// Parses a problem file with default margin rules.
pub fn parse_problem(text: &[u8]) -> Result<ProblemSpec> {
    parse_problem_with(text, MarginOptions::default())
}

pub fn parse_problem_with(text: &[u8], opts: MarginOptions) -> Result<ProblemSpec> {
    let raw: RawProblem = serde_json::from_slice(text).map_err(|e| Error::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    let margins = validate_margins_with(&raw.rows, &raw.cols, opts)?;
    let weights = match raw.weights {
        Some(rows) => {
            let w = WeightMatrix::from_rows(&rows).map_err(|e| match e {
                Error::DimensionMismatch { expected, got } => Error::DimensionMismatch {
                    expected: format!("weights: {expected}"),
                    got,
                },
                other => other,
            })?;
            w.check_dims(&margins)?;
            Some(w)
        }
        None => None,
    };
    let mut metadata = raw.metadata;
    if let Some(label) = raw.label {
        metadata.insert("label".into(), label);
    }
    Ok(ProblemSpec {
        margins,
        weights,
        metadata,
    })
}

/// Serializes a problem back to the file format.
pub fn serialize_problem(problem: &ProblemSpec) -> String {
    let mut metadata = problem.metadata.clone();
    let label = metadata.remove("label");
    let raw = RawProblem {
        rows: problem.margins.rows.iter().map(|&r| r as i64).collect(),
        cols: problem.margins.cols.iter().map(|&c| c as i64).collect(),
        weights: problem.weights.as_ref().map(|w| w.entries().to_rows()),
        label,
        metadata,
    };
    serde_json::to_string(&raw).expect("problem serialization cannot fail")
}
