//! Damped Newton minimization for convex objectives of the form
//! `Σ a_i u_i + Σ b_j v_j + Σ_ij h(u_i + v_j)`.
//!
//! Both the counting dual and the max-product dual have this shape: the
//! Hessian is `[[diag(row sums of H), H], [Hᵀ, diag(col sums of H)]]` for a
//! cell matrix `H`, and the objective is invariant along `(𝟙, −𝟙)`. The
//! engine fixes that gauge to `Σu = Σv` after every step and solves the
//! Newton system with a rank-one term on the gauge direction added.

use nalgebra::{DMatrix, DVector};

use crate::matrix::Matrix;

#[derive(Clone, Debug)]
pub(crate) struct CellEval {
    pub value: f64,
    pub grad_u: Vec<f64>,
    pub grad_v: Vec<f64>,
    pub cell_h: Matrix,
}

impl CellEval {
    pub fn grad_inf_norm(&self) -> f64 {
        self.grad_u
            .iter()
            .chain(&self.grad_v)
            .fold(0.0, |acc, g| acc.max(g.abs()))
    }

    fn gradient(&self) -> DVector<f64> {
        DVector::from_iterator(
            self.grad_u.len() + self.grad_v.len(),
            self.grad_u.iter().chain(&self.grad_v).copied(),
        )
    }
}

pub(crate) trait BipartiteObjective {
    /// `None` when `(u, v)` is outside the open domain.
    fn eval(&self, u: &[f64], v: &[f64]) -> Option<CellEval>;
}

#[derive(Clone, Copy, Debug)]
pub(crate) struct NewtonOptions {
    pub grad_tol: f64,
    pub max_iter: usize,
}

#[derive(Clone, Debug)]
pub(crate) struct NewtonOutcome {
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub eval: CellEval,
    pub iterations: usize,
    pub converged: bool,
    pub diverged: bool,
}

/// Full `(m+n)×(m+n)` Hessian.
pub(crate) fn assemble_hessian(cell_h: &Matrix) -> DMatrix<f64> {
    let (m, n) = (cell_h.nrows(), cell_h.ncols());
    let mut h = DMatrix::zeros(m + n, m + n);
    for i in 0..m {
        for j in 0..n {
            let x = cell_h[(i, j)];
            h[(i, i)] += x;
            h[(m + j, m + j)] += x;
            h[(i, m + j)] = x;
            h[(m + j, i)] = x;
        }
    }
    h
}

/// Shifts `u += δ, v −= δ` so that `Σu = Σv`.
pub(crate) fn normalize_gauge(u: &mut [f64], v: &mut [f64]) {
    let delta = (v.iter().sum::<f64>() - u.iter().sum::<f64>()) / (u.len() + v.len()) as f64;
    u.iter_mut().for_each(|x| *x += delta);
    v.iter_mut().for_each(|x| *x -= delta);
}

fn newton_direction(eval: &CellEval) -> DVector<f64> {
    let (m, n) = (eval.grad_u.len(), eval.grad_v.len());
    let mut h = assemble_hessian(&eval.cell_h);
    let scale = h.trace() / (m + n) as f64;
    let w = 1.0 / ((m + n) as f64);
    for a in 0..m + n {
        for b in 0..m + n {
            let sa = if a < m { 1.0 } else { -1.0 };
            let sb = if b < m { 1.0 } else { -1.0 };
            h[(a, b)] += scale * w * sa * sb;
        }
    }
    let rhs = -eval.gradient();
    let d = match h.clone().cholesky() {
        Some(ch) => ch.solve(&rhs),
        None => h.lu().solve(&rhs).unwrap_or_else(|| rhs.clone()),
    };
    if d.iter().all(|x| x.is_finite()) {
        d
    } else {
        rhs
    }
}

const DIVERGENCE_BOUND: f64 = 1e8;

pub(crate) fn minimize(
    objective: &impl BipartiteObjective,
    mut u: Vec<f64>,
    mut v: Vec<f64>,
    opts: NewtonOptions,
) -> Option<NewtonOutcome> {
    let m = u.len();
    normalize_gauge(&mut u, &mut v);
    let mut eval = objective.eval(&u, &v)?;
    let mut iterations = 0;
    let mut converged = false;
    let mut diverged = false;

    while iterations < opts.max_iter {
        let gnorm = eval.grad_inf_norm();
        if gnorm <= opts.grad_tol {
            converged = true;
            break;
        }
        let d = newton_direction(&eval);
        let slope = eval.gradient().dot(&d);
        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..80 {
            let mut cu: Vec<f64> = u.iter().zip(d.iter()).map(|(x, dx)| x + step * dx).collect();
            let mut cv: Vec<f64> = v
                .iter()
                .zip(d.iter().skip(m))
                .map(|(x, dx)| x + step * dx)
                .collect();
            normalize_gauge(&mut cu, &mut cv);
            if let Some(ce) = objective.eval(&cu, &cv) {
                let armijo = ce.value <= eval.value + 1e-4 * step * slope;
                // near the optimum rounding hides the decrease in value
                let flat = ce.value <= eval.value + 1e-12 * (1.0 + eval.value.abs())
                    && ce.grad_inf_norm() < 0.9 * gnorm;
                if armijo || flat {
                    accepted = Some((cu, cv, ce));
                    break;
                }
            }
            step *= 0.5;
        }
        iterations += 1;
        let Some((cu, cv, ce)) = accepted else {
            break;
        };
        u = cu;
        v = cv;
        eval = ce;
        if !eval.value.is_finite()
            || u.iter().chain(&v).any(|x| x.abs() > DIVERGENCE_BOUND)
        {
            diverged = true;
            break;
        }
    }
    if !converged && eval.grad_inf_norm() <= opts.grad_tol {
        converged = true;
    }
    Some(NewtonOutcome {
        u,
        v,
        eval,
        iterations,
        converged,
        diverged,
    })
}
