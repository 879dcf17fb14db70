//! Log-space special functions shared by the bound formulas.

use num_bigint::BigUint;
use num_traits::One;

/// `ln Γ(x)` for `x > 0`.
pub fn ln_gamma(x: f64) -> f64 {
    statrs::function::gamma::ln_gamma(x)
}

/// `ln s!`.
pub fn ln_factorial(s: u64) -> f64 {
    statrs::function::factorial::ln_factorial(s)
}

/// `ln C(n, k)` evaluated through log-gamma.
pub fn ln_binomial(n: u64, k: u64) -> f64 {
    if k > n {
        return f64::NEG_INFINITY;
    }
    ln_factorial(n) - ln_factorial(k) - ln_factorial(n - k)
}

/// `s ln s` with `0 ln 0 = 0`.
pub fn xlnx(s: f64) -> f64 {
    if s == 0.0 {
        0.0
    } else {
        s * s.ln()
    }
}

/// `ln(s^s / s!)`, the per-margin factor of the lower bounds.
pub fn ln_pow_over_factorial(s: u64) -> f64 {
    xlnx(s as f64) - ln_factorial(s)
}

/// Log of the volume of the standard `(d-1)`-simplex in `R^d`, `√d/(d-1)!`.
pub fn ln_simplex_volume(d: usize) -> f64 {
    0.5 * (d as f64).ln() - ln_factorial(d as u64 - 1)
}

/// Exact binomial coefficient.
pub fn binomial(n: u64, k: u64) -> BigUint {
    if k > n {
        return BigUint::default();
    }
    let k = k.min(n - k);
    let mut acc = BigUint::one();
    for i in 0..k {
        acc *= n - i;
        acc /= i + 1;
    }
    acc
}

/// Numerically stable `ln Σ exp(x_i)`.
pub fn log_sum_exp(xs: impl IntoIterator<Item = f64>) -> f64 {
    let xs: Vec<f64> = xs.into_iter().collect();
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + xs.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}
