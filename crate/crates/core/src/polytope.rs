//! Volume of the transportation polytope `P(R, C)`.
//!
//! The bounds are driven by the point `A = (a_ij)` of `P(R, C)` maximizing
//! `Π a_ij`. On the normalized polytope `N⁻¹P` the optimality condition reads
//! `1/α_ij = λ_i + μ_j`, so the maximizer is found from the `m + n`
//! multipliers by minimizing the convex dual
//!
//! ```text
//! ψ(λ, μ) = Σ (r_i/N) λ_i + Σ (c_j/N) μ_j − Σ ln(λ_i + μ_j)
//! ```
//!
//! whose minimum value minus `mn` equals `max Σ ln α_ij`.

use serde::Serialize;

use crate::dualopt::SolverOptions;
use crate::margins::MarginPair;
use crate::matrix::Matrix;
use crate::newton::{self, BipartiteObjective, CellEval, NewtonOptions};
use crate::special::{ln_factorial, ln_gamma, ln_simplex_volume};
use crate::{Error, Result};

#[derive(Clone, Debug, Serialize)]
pub struct MaxProductPoint {
    /// Maximizer of `Π a_ij` over `P(R, C)`.
    pub a: Matrix,
    /// `ln β(R, C) = Σ ln a_ij`.
    pub log_beta: f64,
    /// Multipliers for `N⁻¹P`, gauged so that `min λ = min μ > 0`.
    pub lambda: Vec<f64>,
    pub mu: Vec<f64>,
    pub iterations: usize,
    /// Largest relative deviation of a row or column sum of `a` from its margin.
    pub margin_residual: f64,
    /// Dual value minus primal value at the returned multipliers.
    pub duality_gap: f64,
}

struct ProductDual {
    row_w: Vec<f64>,
    col_w: Vec<f64>,
}

impl BipartiteObjective for ProductDual {
    fn eval(&self, lam: &[f64], mu: &[f64]) -> Option<CellEval> {
        let (m, n) = (lam.len(), mu.len());
        let mut value = 0.0;
        let mut grad_u = self.row_w.clone();
        let mut grad_v = self.col_w.clone();
        let mut cell_h = Matrix::zeros(m, n);
        for i in 0..m {
            value += self.row_w[i] * lam[i];
            for j in 0..n {
                let s = lam[i] + mu[j];
                if !(s > 0.0) {
                    return None;
                }
                let alpha = 1.0 / s;
                value -= s.ln();
                grad_u[i] -= alpha;
                grad_v[j] -= alpha;
                cell_h[(i, j)] = alpha * alpha;
            }
        }
        for j in 0..n {
            value += self.col_w[j] * mu[j];
        }
        Some(CellEval {
            value,
            grad_u,
            grad_v,
            cell_h,
        })
    }
}

pub fn max_product_point(margins: &MarginPair, opts: SolverOptions) -> Result<MaxProductPoint> {
    let total = margins.total() as f64;
    let (m, n) = (margins.m(), margins.n());
    if margins.rows().contains(&0) || margins.cols().contains(&0) {
        return Err(Error::InvalidDimension("max-product point needs positive margins".into()));
    }
    let objective = ProductDual {
        row_w: margins.rows_f64().iter().map(|r| r / total).collect(),
        col_w: margins.cols_f64().iter().map(|c| c / total).collect(),
    };
    // half the multiplier caps: α_ij of order r_i c_j / N²
    let lam0: Vec<f64> = margins.rows_f64().iter().map(|r| 0.5 * n as f64 * total / r).collect();
    let mu0: Vec<f64> = margins.cols_f64().iter().map(|c| 0.5 * m as f64 * total / c).collect();
    let min_target = objective
        .row_w
        .iter()
        .chain(&objective.col_w)
        .fold(f64::INFINITY, |a, &b| a.min(b));
    let outcome = newton::minimize(
        &objective,
        lam0,
        mu0,
        NewtonOptions {
            grad_tol: opts.tol * min_target,
            max_iter: opts.max_iter,
        },
    )
    .ok_or_else(|| Error::DomainViolation("initial multipliers outside the domain".into()))?;

    let relative_residual = outcome
        .eval
        .grad_u
        .iter()
        .zip(&objective.row_w)
        .chain(outcome.eval.grad_v.iter().zip(&objective.col_w))
        .fold(0.0f64, |acc, (g, w)| acc.max(g.abs() / w));
    if !outcome.converged || outcome.diverged {
        return Err(Error::NoConvergence {
            iterations: outcome.iterations,
            residual: relative_residual,
            best: None,
        });
    }

    let (mut lambda, mut mu) = (outcome.u, outcome.v);
    let shift = 0.5
        * (mu.iter().fold(f64::INFINITY, |a, &b| a.min(b))
            - lambda.iter().fold(f64::INFINITY, |a, &b| a.min(b)));
    lambda.iter_mut().for_each(|x| *x += shift);
    mu.iter_mut().for_each(|x| *x -= shift);

    let a = Matrix::from_fn(m, n, |i, j| total / (lambda[i] + mu[j]));
    let log_beta: f64 = a.as_slice().iter().map(|x| x.ln()).sum();
    // D(λ, μ) − f(α) = Σ λ_i (r_i/N − Σ_j α_ij) + Σ μ_j (c_j/N − Σ_i α_ij)
    let duality_gap = lambda
        .iter()
        .zip(&outcome.eval.grad_u)
        .chain(mu.iter().zip(&outcome.eval.grad_v))
        .map(|(x, g)| x * g)
        .sum();
    Ok(MaxProductPoint {
        a,
        log_beta,
        lambda,
        mu,
        iterations: outcome.iterations,
        margin_residual: relative_residual,
        duality_gap,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct VolumeBoundReport {
    pub log_lower: f64,
    pub log_upper: f64,
    pub log_beta: f64,
    /// `λ(R, C) = (n/2) max N/r_i + (m/2) max N/c_j`.
    pub lambda_factor: f64,
    /// `(m−1)(n−1)`.
    pub dim: usize,
}

/// `(n/2) max_i N/r_i + (m/2) max_j N/c_j`.
pub fn lambda_factor(margins: &MarginPair) -> f64 {
    let total = margins.total() as f64;
    let min_r = *margins.rows().iter().min().expect("nonempty") as f64;
    let min_c = *margins.cols().iter().min().expect("nonempty") as f64;
    0.5 * margins.n() as f64 * total / min_r + 0.5 * margins.m() as f64 * total / min_c
}

/// Two-sided bound on the Euclidean `(m−1)(n−1)`-volume of `P(R, C)`.
pub fn volume_bounds(margins: &MarginPair, mpp: &MaxProductPoint) -> VolumeBoundReport {
    let (m, n) = (margins.m() as f64, margins.n() as f64);
    let mn = m * n;
    let ln_n = (margins.total() as f64).ln();
    let lambda = lambda_factor(margins);
    let common = -(m + n - 1.0) * ln_n + mn * mn.ln() - ln_factorial((mn) as u64) + mpp.log_beta;
    let log_lower = ln_gamma((m + n) / 2.0)
        - std::f64::consts::LN_2
        - 3.0
        - 0.5 * mn.ln()
        - 0.5 * (m + n - 2.0) * std::f64::consts::PI.ln()
        + common;
    let log_upper = (2.0 * std::f64::consts::E).ln()
        + (m + n - 2.0) * lambda.ln()
        + (2.0 * m + 2.0 * n - 2.5) * mn.ln()
        + common;
    VolumeBoundReport {
        log_lower,
        log_upper,
        log_beta: mpp.log_beta,
        lambda_factor: lambda,
        dim: margins.polytope_dim(),
    }
}

/// Bounds on the volume of a section of the standard simplex `Δ ⊂ R^d` by an
/// affine subspace of codimension `k` through an interior point `a`.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct SectionBounds {
    /// Relative to `vol(Δ) = √d/(d−1)!`.
    pub log_lower_ratio: f64,
    pub log_upper_ratio: Option<f64>,
    pub log_lower: f64,
    pub log_upper: Option<f64>,
}

/// `f_a = Σ ln a_i` for the maximizer `a` of the product on the section. The
/// upper bound needs `epsilon` with `a_i ≥ ε/d` for all `i`.
pub fn simplex_section_bounds(d: usize, k: usize, f_a: f64, epsilon: Option<f64>) -> Result<SectionBounds> {
    if d < 2 || k < 1 || k + 2 > d {
        return Err(Error::InvalidDimension(format!("need d ≥ 2 and 1 ≤ k ≤ d−2, got d={d}, k={k}")));
    }
    let df = d as f64;
    let cap = -df * df.ln();
    if !(f_a <= cap + 1e-9 * cap.abs().max(1.0)) {
        return Err(Error::InvalidDimension(format!("f(a) = {f_a} exceeds d ln(1/d) = {cap}")));
    }
    if let Some(eps) = epsilon {
        if !(eps > 0.0 && eps.is_finite()) {
            return Err(Error::InvalidDimension(format!("epsilon must be positive, got {eps}")));
        }
    }
    let kf = k as f64;
    let ln_ball = 0.5 * kf * std::f64::consts::PI.ln() - ln_gamma(0.5 * kf + 1.0);
    let centre = df * df.ln() + f_a;
    let log_lower_ratio = -std::f64::consts::LN_2 - 3.0 - 2.0 * df.ln() - ln_ball + centre;
    let log_upper_ratio = epsilon.map(|eps| (2.0 * std::f64::consts::E).ln() + kf * (df * df / (2.0 * eps)).ln() + centre);
    let ln_vol = ln_simplex_volume(d);
    Ok(SectionBounds {
        log_lower_ratio,
        log_upper_ratio,
        log_lower: log_lower_ratio + ln_vol,
        log_upper: log_upper_ratio.map(|u| u + ln_vol),
    })
}
