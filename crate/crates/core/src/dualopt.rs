//! The convex dual program for weighted table counts.
//!
//! With `x_i = e^{-t_i}` and `y_j = e^{-s_j}` the generating-function bound
//! `F(x, y; W) = Π x_i^{-r_i} Π y_j^{-c_j} Π 1/(1 - w_ij x_i y_j)` becomes the
//! convex function
//!
//! ```text
//! φ(t, s) = Σ r_i t_i + Σ c_j s_j − Σ ln(1 − w_ij e^{−t_i−s_j})
//! ```
//!
//! on `t_i + s_j > ln w_ij`. Its minimum value is `ln ρ(R, C; W)`, an upper
//! bound for the weighted count, and the minimizer yields the typical table
//! `z_ij = w_ij ξ_i η_j / (1 − w_ij ξ_i η_j)`.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use serde::Serialize;

use crate::margins::{MarginPair, WeightMatrix};
use crate::matrix::Matrix;
use crate::newton::{self, BipartiteObjective, CellEval, NewtonOptions};
use crate::special::{ln_factorial, ln_gamma, ln_pow_over_factorial};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, Serialize)]
pub struct SolverOptions {
    /// Converged when `‖∇φ‖_∞ ≤ tol · max(1, N)`.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 200,
        }
    }
}

/// Minimizer of the dual program.
#[derive(Clone, Debug, Serialize)]
pub struct DualSolution {
    /// `ξ_i = e^{-t_i}`.
    pub xi: Vec<f64>,
    /// `η_j = e^{-s_j}`.
    pub eta: Vec<f64>,
    pub t: Vec<f64>,
    pub s: Vec<f64>,
    /// `ln ρ`, the minimum of `φ`.
    pub log_rho: f64,
    pub iterations: usize,
    pub grad_norm: f64,
    pub attained: bool,
}

/// Value, gradient and Hessian of `φ` at a point.
#[derive(Clone, Debug)]
pub struct PhiEval {
    pub value: f64,
    /// `(∂φ/∂t_1, …, ∂φ/∂t_m, ∂φ/∂s_1, …, ∂φ/∂s_n)`.
    pub gradient: Vec<f64>,
    /// `(m+n) × (m+n)`, same variable order as the gradient.
    pub hessian: Matrix,
}

struct DualObjective {
    rows: Vec<f64>,
    cols: Vec<f64>,
    ln_w: Matrix,
}

impl DualObjective {
    fn new(margins: &MarginPair, weights: &WeightMatrix) -> Self {
        Self {
            rows: margins.rows_f64(),
            cols: margins.cols_f64(),
            ln_w: weights.entries().map(f64::ln),
        }
    }
}

impl BipartiteObjective for DualObjective {
    fn eval(&self, t: &[f64], s: &[f64]) -> Option<CellEval> {
        let (m, n) = (self.rows.len(), self.cols.len());
        let mut value: f64 = self.rows.iter().zip(t).map(|(r, x)| r * x).sum::<f64>()
            + self.cols.iter().zip(s).map(|(c, x)| c * x).sum::<f64>();
        let mut grad_u = self.rows.clone();
        let mut grad_v = self.cols.clone();
        let mut cell_h = Matrix::zeros(m, n);
        for i in 0..m {
            for j in 0..n {
                // a = t + s − ln w > 0, so w e^{−t−s} = e^{−a} < 1
                let a = t[i] + s[j] - self.ln_w[(i, j)];
                if !(a > 0.0) {
                    return None;
                }
                let one_minus = -(-a).exp_m1();
                if one_minus <= 0.0 {
                    return None;
                }
                value -= one_minus.ln();
                let z = 1.0 / a.exp_m1();
                grad_u[i] -= z;
                grad_v[j] -= z;
                cell_h[(i, j)] = z * (1.0 + z);
            }
        }
        Some(CellEval {
            value,
            grad_u,
            grad_v,
            cell_h,
        })
    }
}

/// Evaluates `φ(t, s)` with its gradient and Hessian.
pub fn phi_objective(
    t: &[f64],
    s: &[f64],
    margins: &MarginPair,
    weights: &WeightMatrix,
) -> Result<PhiEval> {
    weights.check_dims(margins)?;
    if t.len() != margins.m() || s.len() != margins.n() {
        return Err(Error::DimensionMismatch {
            expected: format!("t of length {}, s of length {}", margins.m(), margins.n()),
            got: format!("{}, {}", t.len(), s.len()),
        });
    }
    let eval = DualObjective::new(margins, weights)
        .eval(t, s)
        .ok_or_else(|| Error::DomainViolation("some t_i + s_j ≤ ln w_ij".into()))?;
    let h = newton::assemble_hessian(&eval.cell_h);
    let dim = margins.m() + margins.n();
    Ok(PhiEval {
        value: eval.value,
        gradient: eval.grad_u.iter().chain(&eval.grad_v).copied().collect(),
        hessian: Matrix::from_fn(dim, dim, |a, b| h[(a, b)]),
    })
}

fn initial_point(margins: &MarginPair, weights: &WeightMatrix) -> (Vec<f64>, Vec<f64>) {
    let (m, n) = (margins.m() as f64, margins.n() as f64);
    let base_t: Vec<f64> = margins
        .rows_f64()
        .iter()
        .map(|&r| ((r + n) / r).ln() / 2.0)
        .collect();
    let base_s: Vec<f64> = margins
        .cols_f64()
        .iter()
        .map(|&c| ((c + m) / c).ln() / 2.0)
        .collect();
    let mut worst = f64::NEG_INFINITY;
    for (i, bt) in base_t.iter().enumerate() {
        for (j, bs) in base_s.iter().enumerate() {
            worst = worst.max(weights.get(i, j).ln() - bt - bs);
        }
    }
    // keep every t_i + s_j − ln w_ij at least 0.1
    let c0 = ((worst + 0.1) / 2.0).max(0.0);
    (
        base_t.iter().map(|x| x + c0).collect(),
        base_s.iter().map(|x| x + c0).collect(),
    )
}

/// `ρ(R, C)` with all weights equal to one.
pub fn solve_unweighted(margins: &MarginPair, opts: SolverOptions) -> Result<DualSolution> {
    solve_weighted(margins, &WeightMatrix::ones(margins.m(), margins.n()), opts)
}

/// `ρ(R, C; W)` for strictly positive `W`.
pub fn solve_weighted(
    margins: &MarginPair,
    weights: &WeightMatrix,
    opts: SolverOptions,
) -> Result<DualSolution> {
    weights.check_dims(margins)?;
    if let Some((row, col)) = weights.first_zero() {
        return Err(Error::ZeroWeightUnsupported { row, col });
    }
    let objective = DualObjective::new(margins, weights);
    let (t0, s0) = initial_point(margins, weights);
    let grad_tol = opts.tol * (margins.total() as f64).max(1.0);
    let outcome = newton::minimize(
        &objective,
        t0,
        s0,
        NewtonOptions {
            grad_tol,
            max_iter: opts.max_iter,
        },
    )
    .ok_or_else(|| Error::DomainViolation("initial point outside the domain".into()))?;

    if outcome.diverged {
        return Err(Error::DivergenceDetected {
            iterations: outcome.iterations,
        });
    }
    let solution = DualSolution {
        xi: outcome.u.iter().map(|t| (-t).exp()).collect(),
        eta: outcome.v.iter().map(|s| (-s).exp()).collect(),
        log_rho: outcome.eval.value,
        iterations: outcome.iterations,
        grad_norm: outcome.eval.grad_inf_norm(),
        attained: outcome.converged,
        t: outcome.u,
        s: outcome.v,
    };
    if !solution.attained {
        return Err(Error::NoConvergence {
            iterations: solution.iterations,
            residual: solution.grad_norm,
            best: Some(Box::new(solution)),
        });
    }
    Ok(solution)
}

/// The maximizer `Z` of `g(·; W)` over the transportation polytope.
#[derive(Clone, Debug, Serialize)]
pub struct TypicalTable {
    pub z: Matrix,
    /// Largest deviation of a row or column sum of `z` from the margins.
    pub margin_residual: f64,
}

pub fn typical_table(
    sol: &DualSolution,
    margins: &MarginPair,
    weights: &WeightMatrix,
) -> Result<TypicalTable> {
    if !sol.attained {
        return Err(Error::NotAttained);
    }
    weights.check_dims(margins)?;
    let z = Matrix::from_fn(margins.m(), margins.n(), |i, j| {
        1.0 / (sol.t[i] + sol.s[j] - weights.get(i, j).ln()).exp_m1()
    });
    let margin_residual = margin_residual(&z, margins);
    Ok(TypicalTable { z, margin_residual })
}

pub(crate) fn margin_residual(x: &Matrix, margins: &MarginPair) -> f64 {
    let rows = x.row_sums().into_iter().zip(margins.rows()).map(|(s, &r)| (s - r as f64).abs());
    let cols = x.col_sums().into_iter().zip(margins.cols()).map(|(s, &c)| (s - c as f64).abs());
    rows.chain(cols).fold(0.0, f64::max)
}

/// `g(X; W) = Σ (x+1) ln(x+1) − x ln x + x ln w` with `0 ln 0 = 0`.
pub fn g_value(x: &Matrix, weights: &WeightMatrix) -> Result<f64> {
    if (x.nrows(), x.ncols()) != (weights.entries().nrows(), weights.entries().ncols()) {
        return Err(Error::DimensionMismatch {
            expected: format!("{}x{}", weights.entries().nrows(), weights.entries().ncols()),
            got: format!("{}x{}", x.nrows(), x.ncols()),
        });
    }
    let mut total = 0.0;
    for i in 0..x.nrows() {
        for j in 0..x.ncols() {
            let v = x[(i, j)];
            if v < 0.0 {
                return Err(Error::NegativeEntry { row: i, col: j, value: v });
            }
            if v == 0.0 {
                continue;
            }
            let w = weights.get(i, j);
            if w <= 0.0 {
                return Err(Error::DomainViolation(format!(
                    "positive entry at ({i}, {j}) with zero weight"
                )));
            }
            total += (v + 1.0) * v.ln_1p() - v * v.ln() + v * w.ln();
        }
    }
    Ok(total)
}

/// Upper and lower bounds for a count, in log space.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoundReport {
    pub log_upper: f64,
    /// Always evaluated; only a proven bound when `certified_lower` holds.
    pub log_lower: f64,
    pub certified_lower: bool,
    /// Log of each multiplicative factor of the bounds.
    pub formula_terms: BTreeMap<String, f64>,
    /// Standard error carried by both bounds (zero for the dual bounds).
    pub log_uncertainty: f64,
}

/// Dual bounds: upper `ρ`, lower `ρ` times the explicit factor that is
/// proven for `m + n ≥ 10`.
pub fn count_bounds(
    margins: &MarginPair,
    weights: Option<&WeightMatrix>,
    sol: &DualSolution,
) -> Result<BoundReport> {
    if let Some(w) = weights {
        w.check_dims(margins)?;
    }
    if sol.xi.len() != margins.m() || sol.eta.len() != margins.n() {
        return Err(Error::DimensionMismatch {
            expected: format!("solution for {}x{}", margins.m(), margins.n()),
            got: format!("{}x{}", sol.xi.len(), sol.eta.len()),
        });
    }
    let (m, n) = (margins.m() as f64, margins.n() as f64);
    let big_n = margins.total() as f64;
    let mn = m * n;
    let mn_int = margins.m() as u64 * margins.n() as u64;

    let gamma_prefactor = ln_gamma((m + n) / 2.0)
        - 2f64.ln()
        - 5.0
        - (m + n - 2.0) / 2.0 * PI.ln()
        - mn.ln()
        - (big_n + mn).ln();
    let power_factor =
        (m + n - 1.0) * (2f64.ln() - 2.0 * mn.ln() - (big_n + 1.0).ln() - (big_n + mn).ln());
    let row_factor: f64 = margins.rows().iter().map(|&r| ln_pow_over_factorial(r)).sum();
    let col_factor: f64 = margins.cols().iter().map(|&c| ln_pow_over_factorial(c)).sum();
    let factorial_ratio = ln_factorial(margins.total()) + ln_factorial(margins.total() + mn_int)
        + mn * mn.ln()
        - big_n * big_n.ln()
        - (big_n + mn) * (big_n + mn).ln()
        - ln_factorial(mn_int);

    let mut formula_terms = BTreeMap::new();
    formula_terms.insert("log_rho".to_string(), sol.log_rho);
    formula_terms.insert("gamma_prefactor".to_string(), gamma_prefactor);
    formula_terms.insert("power_factor".to_string(), power_factor);
    formula_terms.insert("row_factor".to_string(), row_factor);
    formula_terms.insert("col_factor".to_string(), col_factor);
    formula_terms.insert("factorial_ratio".to_string(), factorial_ratio);

    let log_lower =
        sol.log_rho + gamma_prefactor + power_factor + row_factor + col_factor + factorial_ratio;
    Ok(BoundReport {
        log_upper: sol.log_rho,
        log_lower,
        certified_lower: margins.m() + margins.n() >= 10,
        formula_terms,
        log_uncertainty: 0.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, SymmetricEigen};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn pair(r: &[u64], c: &[u64]) -> MarginPair {
        MarginPair::new(r, c).unwrap()
    }

    fn ones(m: &MarginPair) -> WeightMatrix {
        WeightMatrix::ones(m.m(), m.n())
    }

    #[test]
    fn phi_at_known_stationary_point() {
        let m = pair(&[1, 1], &[1, 1]);
        let h = 3f64.ln() / 2.0;
        let e = phi_objective(&[h, h], &[h, h], &m, &ones(&m)).unwrap();
        let expected = 2.0 * 3f64.ln() + 4.0 * 1.5f64.ln();
        assert!((e.value - expected).abs() < 1e-13);
        assert!((e.value - 3.8191).abs() < 1e-4);
        assert!(e.gradient.iter().all(|g| g.abs() < 1e-13));
    }

    #[test]
    fn gradient_tends_to_margins_far_out() {
        let m = pair(&[3, 1], &[2, 2]);
        let e = phi_objective(&[40.0, 40.0], &[40.0, 40.0], &m, &ones(&m)).unwrap();
        let expected = [3.0, 1.0, 2.0, 2.0];
        for (g, x) in e.gradient.iter().zip(expected) {
            assert!((g - x).abs() < 1e-12);
        }
    }

    #[test]
    fn domain_violation() {
        let m = pair(&[1, 1], &[1, 1]);
        let err = phi_objective(&[0.0, 1.0], &[0.0, 1.0], &m, &ones(&m)).unwrap_err();
        assert!(matches!(err, Error::DomainViolation(_)));
        let w = WeightMatrix::from_rows(&[vec![10.0, 1.0], vec![1.0, 1.0]]).unwrap();
        assert!(phi_objective(&[1.0, 1.0], &[1.0, 1.0], &m, &w).is_err());
    }

    fn random_instance(rng: &mut ChaCha8Rng) -> (MarginPair, WeightMatrix, Vec<f64>, Vec<f64>) {
        let m = rng.random_range(2..5usize);
        let n = rng.random_range(2..5usize);
        let rows: Vec<u64> = (0..m).map(|_| rng.random_range(1..20)).collect();
        let total: u64 = rows.iter().sum();
        let mut cols = vec![1u64; n];
        for _ in 0..total - n as u64 {
            cols[rng.random_range(0..n)] += 1;
        }
        let margins = pair(&rows, &cols);
        let w = WeightMatrix::new(Matrix::from_fn(m, n, |_, _| rng.random_range(0.2..3.0))).unwrap();
        let t: Vec<f64> = (0..m).map(|_| rng.random_range(0.6..3.0)).collect();
        let s: Vec<f64> = (0..n).map(|_| rng.random_range(0.6..3.0)).collect();
        (margins, w, t, s)
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let (margins, w, t, s) = random_instance(&mut rng);
            let e = phi_objective(&t, &s, &margins, &w).unwrap();
            let h = 1e-5;
            let x: Vec<f64> = t.iter().chain(&s).copied().collect();
            for k in 0..x.len() {
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[k] += h;
                xm[k] -= h;
                let (tp, sp) = xp.split_at(t.len());
                let (tm, sm) = xm.split_at(t.len());
                let fp = phi_objective(tp, sp, &margins, &w).unwrap().value;
                let fm = phi_objective(tm, sm, &margins, &w).unwrap().value;
                let fd = (fp - fm) / (2.0 * h);
                let g = e.gradient[k];
                assert!(
                    (fd - g).abs() <= 1e-5 * g.abs().max(1.0),
                    "component {k}: fd {fd} vs {g}"
                );
            }
        }
    }

    #[test]
    fn hessian_is_psd_with_gauge_nullspace() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..50 {
            let (margins, w, t, s) = random_instance(&mut rng);
            let e = phi_objective(&t, &s, &margins, &w).unwrap();
            let d = e.hessian.nrows();
            let h = DMatrix::from_fn(d, d, |a, b| e.hessian[(a, b)]);
            assert!((h.clone() - h.transpose()).abs().max() < 1e-14);
            let mut eig: Vec<f64> = SymmetricEigen::new(h.clone()).eigenvalues.iter().copied().collect();
            eig.sort_by(f64::total_cmp);
            let scale = eig[d - 1];
            assert!(eig[0].abs() <= 1e-10 * scale);
            assert!(eig[1] > 1e-10 * scale, "second eigenvalue {}", eig[1]);
            let g = DMatrix::from_fn(d, 1, |a, _| if a < margins.m() { 1.0 } else { -1.0 });
            assert!((h * g).abs().max() < 1e-12 * scale);
        }
    }

    #[test]
    fn symmetric_two_by_two() {
        let m = pair(&[1, 1], &[1, 1]);
        let sol = solve_unweighted(&m, SolverOptions::default()).unwrap();
        assert!(sol.attained);
        assert!((sol.log_rho.exp() - 45.5625).abs() < 1e-9);
        for x in &sol.xi {
            for y in &sol.eta {
                assert!((x * y - 1.0 / 3.0).abs() < 1e-12);
            }
        }
        let sum_t: f64 = sol.t.iter().sum();
        let sum_s: f64 = sol.s.iter().sum();
        assert!((sum_t - sum_s).abs() < 1e-12);

        let m = pair(&[2, 2], &[2, 2]);
        let sol = solve_unweighted(&m, SolverOptions::default()).unwrap();
        assert!((sol.log_rho - 8.0 * 2f64.ln()).abs() < 1e-10);
        assert!(sol.log_rho.exp() >= 3.0);
    }

    #[test]
    fn four_by_four_upper_bound() {
        let m = pair(&[220, 215, 93, 64], &[108, 286, 71, 127]);
        let sol = solve_unweighted(&m, SolverOptions::default()).unwrap();
        assert!(sol.log_rho >= (1_225_914_276_768_514f64).ln());
        let report = count_bounds(&m, None, &sol).unwrap();
        assert!(!report.certified_lower);
        assert!(report.log_lower < report.log_upper);
    }

    #[test]
    fn weighted_reductions() {
        let m = pair(&[1, 1], &[1, 1]);
        let plain = solve_unweighted(&m, SolverOptions::default()).unwrap();
        let unit = solve_weighted(&m, &ones(&m), SolverOptions::default()).unwrap();
        assert_eq!(plain.log_rho, unit.log_rho);

        let two = WeightMatrix::new(Matrix::filled(2, 2, 2.0)).unwrap();
        let sol = solve_weighted(&m, &two, SolverOptions::default()).unwrap();
        assert!((sol.log_rho.exp() - 182.25).abs() < 1e-8);

        let w = WeightMatrix::from_rows(&[vec![2.0, 1.0], vec![1.0, 1.0]]).unwrap();
        let sol = solve_weighted(&m, &w, SolverOptions::default()).unwrap();
        assert!(sol.log_rho.exp() >= 3.0);
        for i in 0..2 {
            for j in 0..2 {
                assert!(w.get(i, j) * sol.xi[i] * sol.eta[j] < 1.0);
            }
        }
    }

    #[test]
    fn zero_weight_rejected() {
        let m = pair(&[1, 1], &[1, 1]);
        let w = WeightMatrix::from_rows(&[vec![1.0, 1.0], vec![1.0, 0.0]]).unwrap();
        assert!(matches!(
            solve_weighted(&m, &w, SolverOptions::default()),
            Err(Error::ZeroWeightUnsupported { row: 1, col: 1 })
        ));
    }

    #[test]
    fn no_convergence_returns_best_iterate() {
        let m = pair(&[220, 215, 93, 64], &[108, 286, 71, 127]);
        let opts = SolverOptions { tol: 1e-10, max_iter: 1 };
        match solve_unweighted(&m, opts) {
            Err(Error::NoConvergence { best: Some(best), iterations, .. }) => {
                assert_eq!(iterations, 1);
                assert!(!best.attained);
                assert!(best.log_rho.is_finite());
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn typical_tables() {
        let m = pair(&[1, 1], &[1, 1]);
        let sol = solve_unweighted(&m, SolverOptions::default()).unwrap();
        let z = typical_table(&sol, &m, &ones(&m)).unwrap();
        assert!(z.z.max_abs_diff(&Matrix::filled(2, 2, 0.5)) < 1e-12);

        let m = pair(&[2, 2], &[2, 2]);
        let sol = solve_unweighted(&m, SolverOptions::default()).unwrap();
        let z = typical_table(&sol, &m, &ones(&m)).unwrap();
        assert!(z.z.max_abs_diff(&Matrix::filled(2, 2, 1.0)) < 1e-10);

        let m = pair(&[2, 2], &[3, 1]);
        let sol = solve_unweighted(&m, SolverOptions::default()).unwrap();
        let z = typical_table(&sol, &m, &ones(&m)).unwrap();
        let expected = Matrix::from_rows(&[vec![1.5, 0.5], vec![1.5, 0.5]]).unwrap();
        assert!(z.z.max_abs_diff(&expected) < 1e-10);
        assert!(z.margin_residual < 1e-9);

        let mut unattained = sol.clone();
        unattained.attained = false;
        assert!(matches!(typical_table(&unattained, &m, &ones(&m)), Err(Error::NotAttained)));
    }

    #[test]
    fn g_values() {
        let w = WeightMatrix::ones(2, 2);
        let g = g_value(&Matrix::filled(2, 2, 0.5), &w).unwrap();
        assert!((g - (6.0 * 3f64.ln() - 4.0 * 2f64.ln())).abs() < 1e-13);
        assert!((g - 3.81909).abs() < 1e-5);
        assert_eq!(g_value(&Matrix::zeros(2, 2), &w).unwrap(), 0.0);
        let w3 = WeightMatrix::new(Matrix::filled(2, 2, 3.0)).unwrap();
        assert_eq!(g_value(&Matrix::zeros(2, 2), &w3).unwrap(), 0.0);
        let g = g_value(&Matrix::filled(2, 2, 1.0), &w).unwrap();
        assert!((g - 8.0 * 2f64.ln()).abs() < 1e-13);
        let mut neg = Matrix::filled(2, 2, 1.0);
        neg[(1, 0)] = -0.1;
        assert!(matches!(g_value(&neg, &w), Err(Error::NegativeEntry { row: 1, col: 0, .. })));
    }

    #[test]
    fn duality_identity_and_gauge() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..30 {
            let (margins, w, _, _) = random_instance(&mut rng);
            let sol = solve_weighted(&margins, &w, SolverOptions::default()).unwrap();
            let z = typical_table(&sol, &margins, &w).unwrap();
            let g = g_value(&z.z, &w).unwrap();
            assert!((sol.log_rho - g).abs() <= 1e-8 * (1.0 + sol.log_rho.abs()));
            assert!(z.margin_residual <= 1e-9 * margins.total() as f64);
            let shift = 0.37;
            let t: Vec<f64> = sol.t.iter().map(|x| x + shift).collect();
            let s: Vec<f64> = sol.s.iter().map(|x| x - shift).collect();
            let shifted = phi_objective(&t, &s, &margins, &w).unwrap().value;
            assert!((shifted - sol.log_rho).abs() < 1e-10 * (1.0 + sol.log_rho.abs()));
            let diff: f64 = sol.t.iter().sum::<f64>() - sol.s.iter().sum::<f64>();
            assert!(diff.abs() < 1e-12 * (1.0 + sol.t.iter().map(|x| x.abs()).sum::<f64>()));
        }
    }

    #[test]
    fn lower_bound_below_upper() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..20 {
            let (margins, w, _, _) = random_instance(&mut rng);
            let sol = solve_weighted(&margins, &w, SolverOptions::default()).unwrap();
            let report = count_bounds(&margins, Some(&w), &sol).unwrap();
            assert!(report.log_lower < report.log_upper);
            assert_eq!(report.certified_lower, margins.m() + margins.n() >= 10);
            let sum: f64 = report.formula_terms.values().sum();
            assert!((sum - report.log_lower).abs() < 1e-9 * report.log_lower.abs().max(1.0));
        }
    }

    #[test]
    fn bounds_finite_for_huge_totals() {
        let m = pair(&[400_000_000, 600_000_000], &[500_000_000, 500_000_000]);
        let sol = solve_unweighted(&m, SolverOptions::default()).unwrap();
        let report = count_bounds(&m, None, &sol).unwrap();
        assert!(report.log_lower.is_finite() && report.log_upper.is_finite());
        assert!(report.log_lower < report.log_upper);
    }
}
