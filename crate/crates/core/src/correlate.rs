//! The independence heuristic and how far counts stray from it.
//!
//! Under the uniform measure on nonnegative `m × n` integer matrices with
//! total `N`, the events "row sums are `R`" and "column sums are `C`" have
//! exactly computable probabilities. Treating them as independent gives
//! `I(R, C)`. Cloning margins `(R, C) ↦ (R_k, C_k)` makes both
//! `(1/k²) ln #` and `(1/k²) ln I` converge, to `ln ρ(R, C)` and to an
//! entropy expression respectively; their difference splits into
//! `g(Z) − g(Y)` and an entropy gap that vanishes exactly when all row sums or
//! all column sums are equal.

use num_bigint::BigInt;
use num_rational::BigRational;
use serde::Serialize;

use crate::dualopt::{g_value, typical_table, DualSolution};
use crate::margins::{MarginPair, WeightMatrix};
use crate::matrix::Matrix;
use crate::special::{binomial, ln_binomial, xlnx};
use crate::{Error, Result};

/// `ln I(R, C)`.
pub fn independence_heuristic(margins: &MarginPair) -> f64 {
    let (m, n) = (margins.m() as u64, margins.n() as u64);
    let total = margins.total();
    let rows: f64 = margins.rows().iter().map(|&r| ln_binomial(r + n - 1, n - 1)).sum();
    let cols: f64 = margins.cols().iter().map(|&c| ln_binomial(c + m - 1, m - 1)).sum();
    rows + cols - ln_binomial(total + m * n - 1, m * n - 1)
}

/// `I(R, C)` as an exact rational.
pub fn independence_heuristic_exact(margins: &MarginPair) -> BigRational {
    let (m, n) = (margins.m() as u64, margins.n() as u64);
    let mut numer = BigInt::from(1);
    for &r in margins.rows() {
        numer *= BigInt::from(binomial(r + n - 1, n - 1));
    }
    for &c in margins.cols() {
        numer *= BigInt::from(binomial(c + m - 1, m - 1));
    }
    let denom = BigInt::from(binomial(margins.total() + m * n - 1, m * n - 1));
    BigRational::new(numer, denom)
}

/// `H(p) = Σ p_i ln(1/p_i)`.
pub fn entropy(p: &[f64]) -> Result<f64> {
    if let Some(bad) = p.iter().find(|x| !(**x >= 0.0 && x.is_finite())) {
        return Err(Error::NotDistribution(format!("entry {bad} is not a nonnegative number")));
    }
    let sum: f64 = p.iter().sum();
    if (sum - 1.0).abs() > 1e-12 {
        return Err(Error::NotDistribution(format!("entries sum to {sum}")));
    }
    Ok(entropy_of(p.iter().copied()))
}

fn entropy_of(p: impl Iterator<Item = f64>) -> f64 {
    -p.map(xlnx).sum::<f64>()
}

/// `y_ij = r_i c_j / N`, kept as integer numerators over the common denominator `N`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct IndependenceMatrix {
    numerators: Vec<Vec<u128>>,
    denominator: u64,
}

impl IndependenceMatrix {
    pub fn numerators(&self) -> &[Vec<u128>] {
        &self.numerators
    }

    pub fn denominator(&self) -> u64 {
        self.denominator
    }

    pub fn entry(&self, i: usize, j: usize) -> BigRational {
        BigRational::new(BigInt::from(self.numerators[i][j]), BigInt::from(self.denominator))
    }

    pub fn as_matrix(&self) -> Matrix {
        let d = self.denominator as f64;
        let m = self.numerators.len();
        let n = self.numerators.first().map_or(0, Vec::len);
        Matrix::from_fn(m, n, |i, j| self.numerators[i][j] as f64 / d)
    }
}

pub fn independence_matrix(margins: &MarginPair) -> IndependenceMatrix {
    IndependenceMatrix {
        numerators: margins
            .rows()
            .iter()
            .map(|&r| margins.cols().iter().map(|&c| r as u128 * c as u128).collect())
            .collect(),
        denominator: margins.total(),
    }
}

struct Entropies {
    rows: f64,
    cols: f64,
    joint: f64,
}

fn entropies(margins: &MarginPair) -> Entropies {
    let (m, n) = (margins.m() as f64, margins.n() as f64);
    let total = margins.total() as f64;
    let scale = total + m * n;
    Entropies {
        rows: entropy_of(margins.rows_f64().into_iter().map(|r| (r + n) / scale)),
        cols: entropy_of(margins.cols_f64().into_iter().map(|c| (c + m) / scale)),
        joint: entropy_of(
            margins
                .rows_f64()
                .into_iter()
                .flat_map(|r| margins.cols_f64().into_iter().map(move |c| (r * c + total) / (total * scale))),
        ),
    }
}

fn margin_terms(margins: &MarginPair) -> f64 {
    let (m, n) = (margins.m() as f64, margins.n() as f64);
    let total = margins.total() as f64;
    -margins.rows_f64().into_iter().map(xlnx).sum::<f64>() - margins.cols_f64().into_iter().map(xlnx).sum::<f64>()
        + xlnx(total)
        + xlnx(total + m * n)
}

/// `lim (1/k²) ln I(R_k, C_k)`.
pub fn clone_rate_independence(margins: &MarginPair) -> f64 {
    let (m, n) = (margins.m() as f64, margins.n() as f64);
    let h = entropies(margins);
    -(margins.total() as f64 + m * n) * (h.rows + h.cols) + margin_terms(margins)
}

/// Entropy form of `g(Y)` for the independence matrix `Y`.
pub fn g_independence(margins: &MarginPair) -> f64 {
    let (m, n) = (margins.m() as f64, margins.n() as f64);
    -(margins.total() as f64 + m * n) * entropies(margins).joint + margin_terms(margins)
}

/// `lim (1/k²) ln #(R_k, C_k) = ln ρ(R, C)`.
pub fn clone_rate_rho(sol: &DualSolution) -> Result<f64> {
    if !sol.attained {
        return Err(Error::NotAttained);
    }
    Ok(sol.log_rho)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Attract,
    Neutral,
    Inconclusive,
}

#[derive(Clone, Debug, Serialize)]
pub struct AttractionReport {
    #[serde(rename = "log_I_rate")]
    pub log_i_rate: f64,
    pub log_rho: f64,
    /// `g(Z) − g(Y)`.
    pub g_gap: f64,
    /// `(N + mn)(H_rows + H_cols − H_joint)`.
    pub entropy_gap: f64,
    /// `log_rho − log_I_rate`.
    pub attraction_coeff: f64,
    pub verdict: Verdict,
    /// All row sums equal or all column sums equal.
    pub constant_margins: bool,
}

pub fn attraction_report(margins: &MarginPair, sol: &DualSolution) -> Result<AttractionReport> {
    let log_rho = clone_rate_rho(sol)?;
    let ones = WeightMatrix::ones(margins.m(), margins.n());
    let z = typical_table(sol, margins, &ones)?.z;
    let y = independence_matrix(margins).as_matrix();
    let g_gap = g_value(&z, &ones)? - g_value(&y, &ones)?;
    let (m, n) = (margins.m() as f64, margins.n() as f64);
    let scale = margins.total() as f64 + m * n;
    let h = entropies(margins);
    let entropy_gap = scale * (h.rows + h.cols - h.joint);
    let log_i_rate = clone_rate_independence(margins);
    let attraction_coeff = log_rho - log_i_rate;
    let threshold = 1e-6 * scale;
    let verdict = if attraction_coeff.abs() <= threshold {
        Verdict::Neutral
    } else if attraction_coeff > threshold {
        Verdict::Attract
    } else {
        Verdict::Inconclusive
    };
    Ok(AttractionReport {
        log_i_rate,
        log_rho,
        g_gap,
        entropy_gap,
        attraction_coeff,
        verdict,
        constant_margins: constant_margins(margins),
    })
}

/// `(N − r_i m)(N − c_j n) = 0` for all `i, j`, in exact integer arithmetic.
pub fn constant_margins(margins: &MarginPair) -> bool {
    let total = margins.total() as i128;
    let (m, n) = (margins.m() as i128, margins.n() as i128);
    margins.rows().iter().all(|&r| {
        margins
            .cols()
            .iter()
            .all(|&c| (total - r as i128 * m) * (total - c as i128 * n) == 0)
    })
}
