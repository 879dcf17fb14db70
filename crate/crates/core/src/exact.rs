//! Exact desk-scale oracles.
//!
//! [`exact_count`] is a dynamic program over partial row-sum vectors: the
//! columns are split into two groups, every feasible vector `p` of row sums
//! for the left group is enumerated, and the count is
//! `Σ_p A_left(p) · A_right(R − p)`. Groups of up to three columns are closed
//! directly (two columns reduce to counting bounded compositions, three to a
//! small two-dimensional table), larger groups recurse with memoized states
//! keyed up to permutations of interchangeable rows. Counts run in `u128` and restart in
//! arbitrary precision on overflow.
//!
//! [`brute_force_count`] is independent of all of that: it walks every
//! assignment of the `(m-1)(n-1)` free cells.

use std::collections::HashMap;

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{CheckedAdd, CheckedMul, CheckedSub, One, ToPrimitive, Zero};
use serde::{Serialize, Serializer};

use crate::margins::{MarginPair, WeightMatrix};
use crate::{Error, Result};

pub const DEFAULT_BUDGET: f64 = 1e9;
pub const BRUTE_FORCE_BUDGET: f64 = 1e7;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CountMethod {
    Dp,
    Brute,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ExactCount {
    #[serde(serialize_with = "as_decimal")]
    pub value: BigUint,
    pub method: CountMethod,
}

impl ExactCount {
    /// Natural log of the count; `-inf` for zero.
    pub fn ln_value(&self) -> f64 {
        let bits = self.value.bits();
        if bits <= 1000 {
            return self.value.to_f64().map_or(f64::NAN, f64::ln);
        }
        let shift = bits - 64;
        let top = (&self.value >> shift).to_f64().expect("64-bit mantissa");
        top.ln() + shift as f64 * std::f64::consts::LN_2
    }
}

fn as_decimal<S: Serializer>(v: &BigUint, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&v.to_str_radix(10))
}

trait Count: Clone + Zero + One + CheckedAdd + CheckedMul + CheckedSub + Into<BigUint> {}

impl Count for u128 {}

impl Count for BigUint {}

/// Column-major view of the allowed cells, oriented so that the state
/// vectors run over `rows`.
struct Problem {
    rows: Vec<u64>,
    cols: Vec<u64>,
    /// `allowed[j][i]` for column `j`, row `i`.
    allowed: Vec<Vec<bool>>,
}

impl Problem {
    fn new(margins: &MarginPair, pattern: Option<&WeightMatrix>, transpose: bool) -> Self {
        let (m, n) = (margins.m(), margins.n());
        let cell = |i: usize, j: usize| pattern.is_none_or(|w| w.get(i, j) != 0.0);
        if transpose {
            Self {
                rows: margins.cols().to_vec(),
                cols: margins.rows().to_vec(),
                allowed: (0..m).map(|i| (0..n).map(|j| cell(i, j)).collect()).collect(),
            }
        } else {
            Self {
                rows: margins.rows().to_vec(),
                cols: margins.cols().to_vec(),
                allowed: (0..n).map(|j| (0..m).map(|i| cell(i, j)).collect()).collect(),
            }
        }
    }
}

struct Counter<'a, T> {
    problem: &'a Problem,
    memo: HashMap<(usize, usize, Vec<u64>), T>,
    /// Per block, rows grouped by their allowed cells within the block.
    groups: HashMap<(usize, usize), Vec<usize>>,
}

impl<'a, T: Count> Counter<'a, T> {
    fn new(problem: &'a Problem) -> Self {
        Self {
            problem,
            memo: HashMap::new(),
            groups: HashMap::new(),
        }
    }

    /// Rows with identical allowed cells over `lo..hi` are interchangeable, so
    /// the block count only depends on the multiset of their sums.
    fn canonical(&mut self, lo: usize, hi: usize, v: &[u64]) -> Vec<u64> {
        let problem = self.problem;
        let groups = self.groups.entry((lo, hi)).or_insert_with(|| {
            let signature = |i: usize| (lo..hi).map(|j| problem.allowed[j][i]).collect::<Vec<_>>();
            let mut seen: Vec<Vec<bool>> = Vec::new();
            (0..v.len())
                .map(|i| {
                    let s = signature(i);
                    match seen.iter().position(|t| *t == s) {
                        Some(g) => g,
                        None => {
                            seen.push(s);
                            seen.len() - 1
                        }
                    }
                })
                .collect()
        });
        let mut tagged: Vec<(usize, u64)> = groups.iter().copied().zip(v.iter().copied()).collect();
        tagged.sort_unstable();
        tagged.into_iter().map(|(_, x)| x).collect()
    }

    /// Tables over columns `lo..hi` with row sums `v`; `None` on overflow.
    fn count(&mut self, lo: usize, hi: usize, v: &[u64]) -> Option<T> {
        let cols = &self.problem.cols[lo..hi];
        if v.iter().sum::<u64>() != cols.iter().sum::<u64>() {
            return Some(T::zero());
        }
        match hi - lo {
            0 => Some(T::one()),
            1 => {
                let allowed = &self.problem.allowed[lo];
                let ok = v.iter().zip(allowed).all(|(&x, &a)| a || x == 0);
                Some(if ok { T::one() } else { T::zero() })
            }
            2 => {
                let (a1, a2) = (&self.problem.allowed[lo], &self.problem.allowed[lo + 1]);
                let mut lower = Vec::with_capacity(v.len());
                let mut upper = Vec::with_capacity(v.len());
                for i in 0..v.len() {
                    match (a1[i], a2[i]) {
                        (true, true) => {
                            lower.push(0);
                            upper.push(v[i]);
                        }
                        (true, false) => {
                            lower.push(v[i]);
                            upper.push(v[i]);
                        }
                        (false, true) => {
                            lower.push(0);
                            upper.push(0);
                        }
                        (false, false) => {
                            if v[i] != 0 {
                                return Some(T::zero());
                            }
                            lower.push(0);
                            upper.push(0);
                        }
                    }
                }
                bounded_compositions(&lower, &upper, self.problem.cols[lo])
            }
            3 => {
                let key = (lo, hi, self.canonical(lo, hi, v));
                if let Some(hit) = self.memo.get(&key) {
                    return Some(hit.clone());
                }
                let total = self.three_columns(lo, v)?;
                self.memo.insert(key, total.clone());
                Some(total)
            }
            _ => {
                let key = (lo, hi, self.canonical(lo, hi, v));
                if let Some(hit) = self.memo.get(&key) {
                    return Some(hit.clone());
                }
                let mid = (lo + hi) / 2;
                let target: u64 = self.problem.cols[lo..mid].iter().sum();
                let caps: Vec<u64> = (0..v.len())
                    .map(|i| {
                        let reach: u64 = (lo..mid)
                            .filter(|&j| self.problem.allowed[j][i])
                            .map(|j| self.problem.cols[j])
                            .sum();
                        reach.min(v[i])
                    })
                    .collect();
                let mut total = T::zero();
                let mut p = vec![0u64; v.len()];
                let mut overflow = false;
                self.for_each_split(&caps, target, 0, &mut p, &mut |this, p| {
                    if overflow {
                        return;
                    }
                    let rest: Vec<u64> = v.iter().zip(p).map(|(a, b)| a - b).collect();
                    let left = match this.count(lo, mid, p) {
                        Some(x) => x,
                        None => {
                            overflow = true;
                            return;
                        }
                    };
                    if left.is_zero() {
                        return;
                    }
                    let right = match this.count(mid, hi, &rest) {
                        Some(x) => x,
                        None => {
                            overflow = true;
                            return;
                        }
                    };
                    match left.checked_mul(&right).and_then(|x| total.checked_add(&x)) {
                        Some(t) => total = t,
                        None => overflow = true,
                    }
                });
                if overflow {
                    return None;
                }
                self.memo.insert(key, total.clone());
                Some(total)
            }
        }
    }

    /// Three columns with row sums `v`: the entries of the two narrowest
    /// columns are tracked as a two-dimensional table of running totals, and
    /// the widest column takes whatever each row has left.
    fn three_columns(&self, lo: usize, v: &[u64]) -> Option<T> {
        let mut order = [lo, lo + 1, lo + 2];
        order.sort_by_key(|&j| self.problem.cols[j]);
        let [ja, jb, jc] = order;
        let (a, b) = (self.problem.cols[ja] as usize, self.problem.cols[jb] as usize);
        let width = b + 1;
        let mut table = vec![T::zero(); (a + 1) * width];
        table[0] = T::one();
        let mut prefix = vec![T::zero(); (a + 1) * width];
        for (i, &w) in v.iter().enumerate() {
            let allowed = |j: usize| self.problem.allowed[j][i];
            let w = w as usize;
            // prefix[s][t] = Σ_{t' ≤ t} table[s][t']
            for s in 0..=a {
                let mut acc = T::zero();
                for t in 0..=b {
                    acc = acc.checked_add(&table[s * width + t])?;
                    prefix[s * width + t] = acc.clone();
                }
            }
            let x_max = if allowed(ja) { w.min(a) } else { 0 };
            for s in 0..=a {
                for t in 0..=b {
                    let mut acc = T::zero();
                    for x in 0..=x_max.min(s) {
                        let y_hi = if allowed(jb) { w - x } else { 0 };
                        let y_lo = if allowed(jc) { 0 } else { w - x };
                        if y_lo > y_hi || y_lo > t {
                            continue;
                        }
                        let row = (s - x) * width;
                        acc = acc.checked_add(&prefix[row + t - y_lo])?;
                        if t > y_hi {
                            acc = acc.checked_sub(&prefix[row + t - y_hi - 1])?;
                        }
                    }
                    table[s * width + t] = acc;
                }
            }
        }
        Some(table[a * width + b].clone())
    }

    /// Calls `f` for every `p ≤ caps` with `Σ p = target`.
    fn for_each_split(
        &mut self,
        caps: &[u64],
        target: u64,
        i: usize,
        p: &mut Vec<u64>,
        f: &mut impl FnMut(&mut Self, &[u64]),
    ) {
        if i == caps.len() - 1 {
            if target <= caps[i] {
                p[i] = target;
                f(self, p);
            }
            return;
        }
        let rest_cap: u64 = caps[i + 1..].iter().sum();
        let low = target.saturating_sub(rest_cap);
        let high = caps[i].min(target);
        for x in low..=high {
            p[i] = x;
            self.for_each_split(caps, target - x, i + 1, p, f);
        }
    }
}

/// Number of integer vectors `lower ≤ x ≤ upper` with `Σ x = total`.
fn bounded_compositions<T: Count>(lower: &[u64], upper: &[u64], total: u64) -> Option<T> {
    let base: u64 = lower.iter().sum();
    if base > total {
        return Some(T::zero());
    }
    let c = (total - base) as usize;
    let mut ways = vec![T::zero(); c + 1];
    ways[0] = T::one();
    let mut prefix = vec![T::zero(); c + 2];
    for (lo, hi) in lower.iter().zip(upper) {
        let width = (hi - lo) as usize;
        for s in 0..=c {
            prefix[s + 1] = prefix[s].checked_add(&ways[s])?;
        }
        for s in 0..=c {
            let from = s.saturating_sub(width);
            ways[s] = prefix[s + 1].checked_sub(&prefix[from])?;
        }
    }
    Some(ways[c].clone())
}

fn state_estimate(v: &[u64]) -> f64 {
    v.iter().map(|&x| x as f64 + 1.0).product()
}

fn check_pattern(margins: &MarginPair, pattern: &WeightMatrix) -> Result<()> {
    pattern.check_dims(margins)?;
    if !pattern.is_zero_one() {
        return Err(Error::DomainViolation("pattern entries must be 0 or 1".into()));
    }
    Ok(())
}

fn count_dp(margins: &MarginPair, pattern: Option<&WeightMatrix>, budget: f64) -> Result<ExactCount> {
    let by_rows = state_estimate(margins.rows());
    let by_cols = state_estimate(margins.cols());
    let estimate = by_rows.min(by_cols);
    if estimate > budget {
        return Err(Error::BudgetExceeded { estimate, budget });
    }
    let problem = Problem::new(margins, pattern, by_cols < by_rows);
    let n = problem.cols.len();
    let value = match Counter::<u128>::new(&problem).count(0, n, &problem.rows) {
        Some(v) => v.into(),
        None => Counter::<BigUint>::new(&problem)
            .count(0, n, &problem.rows)
            .expect("arbitrary precision cannot overflow"),
    };
    Ok(ExactCount {
        value,
        method: CountMethod::Dp,
    })
}

/// `#(R, C)` with the default state budget.
pub fn exact_count(margins: &MarginPair) -> Result<ExactCount> {
    count_dp(margins, None, DEFAULT_BUDGET)
}

/// `#(R, C)` with an explicit budget on the state-space estimate `Π (r_i + 1)`.
pub fn exact_count_with_budget(margins: &MarginPair, budget: f64) -> Result<ExactCount> {
    count_dp(margins, None, budget)
}

/// Tables supported on a 0/1 pattern, i.e. `T(R, C; W)` for 0/1 weights.
pub fn exact_count_weighted(margins: &MarginPair, pattern: &WeightMatrix) -> Result<ExactCount> {
    exact_count_weighted_with_budget(margins, pattern, DEFAULT_BUDGET)
}

pub fn exact_count_weighted_with_budget(
    margins: &MarginPair,
    pattern: &WeightMatrix,
    budget: f64,
) -> Result<ExactCount> {
    check_pattern(margins, pattern)?;
    count_dp(margins, Some(pattern), budget)
}

/// Counts tables by walking every assignment of the free cells.
pub fn brute_force_count(margins: &MarginPair, pattern: Option<&WeightMatrix>) -> Result<ExactCount> {
    if let Some(p) = pattern {
        check_pattern(margins, p)?;
    }
    let (m, n) = (margins.m(), margins.n());
    let mut estimate = 1.0;
    for i in 0..m.saturating_sub(1) {
        for j in 0..n.saturating_sub(1) {
            estimate *= margins.rows()[i].min(margins.cols()[j]) as f64 + 1.0;
        }
    }
    if estimate > BRUTE_FORCE_BUDGET {
        return Err(Error::BudgetExceeded {
            estimate,
            budget: BRUTE_FORCE_BUDGET,
        });
    }
    let allowed = |i: usize, j: usize| pattern.is_none_or(|w| w.get(i, j) != 0.0);
    let mut rows = margins.rows().to_vec();
    let mut cols = margins.cols().to_vec();
    let mut found = 0u64;
    walk_free_cells(0, m, n, &mut rows, &mut cols, &allowed, &mut found);
    Ok(ExactCount {
        value: BigUint::from(found),
        method: CountMethod::Brute,
    })
}

fn walk_free_cells(
    cell: usize,
    m: usize,
    n: usize,
    rows: &mut [u64],
    cols: &mut [u64],
    allowed: &impl Fn(usize, usize) -> bool,
    found: &mut u64,
) {
    let free = (m - 1) * (n - 1);
    if cell == free {
        // last column for rows < m-1, last row for columns < n-1, then the corner
        for i in 0..m - 1 {
            if rows[i] > 0 && !allowed(i, n - 1) {
                return;
            }
        }
        for j in 0..n - 1 {
            if cols[j] > 0 && !allowed(m - 1, j) {
                return;
            }
        }
        let last_row_used: u64 = cols[..n - 1].iter().sum();
        let last_col_used: u64 = rows[..m - 1].iter().sum();
        if last_row_used > rows[m - 1] || last_col_used > cols[n - 1] {
            return;
        }
        let corner = rows[m - 1] - last_row_used;
        if corner != cols[n - 1] - last_col_used {
            return;
        }
        if corner > 0 && !allowed(m - 1, n - 1) {
            return;
        }
        *found += 1;
        return;
    }
    let (i, j) = (cell / (n - 1), cell % (n - 1));
    let high = if allowed(i, j) { rows[i].min(cols[j]) } else { 0 };
    for x in 0..=high {
        rows[i] -= x;
        cols[j] -= x;
        walk_free_cells(cell + 1, m, n, rows, cols, allowed, found);
        rows[i] += x;
        cols[j] += x;
    }
}

/// Covolume of the lattice of integer `m × n` matrices with zero margins,
/// from the Gram determinant of the basis `e_ij − e_in − e_mj + e_mn`.
pub fn lattice_covolume(m: usize, n: usize) -> Result<f64> {
    if m < 2 || n < 2 {
        return Err(Error::InvalidDimension(format!("covolume needs m, n ≥ 2, got {m}x{n}")));
    }
    let basis = zero_margin_basis(m, n);
    Ok(gram_determinant(&basis).sqrt())
}

pub(crate) fn zero_margin_basis(m: usize, n: usize) -> Vec<Vec<f64>> {
    let mut basis = Vec::with_capacity((m - 1) * (n - 1));
    for i in 0..m - 1 {
        for j in 0..n - 1 {
            let mut b = vec![0.0; m * n];
            b[i * n + j] = 1.0;
            b[i * n + n - 1] = -1.0;
            b[(m - 1) * n + j] = -1.0;
            b[(m - 1) * n + n - 1] = 1.0;
            basis.push(b);
        }
    }
    basis
}

pub(crate) fn gram_determinant(basis: &[Vec<f64>]) -> f64 {
    let k = basis.len();
    let gram = nalgebra::DMatrix::from_fn(k, k, |a, b| {
        basis[a].iter().zip(&basis[b]).map(|(x, y)| x * y).sum::<f64>()
    });
    gram.determinant()
}

/// Volume of `P(R, C)` from the Ehrhart polynomial `t ↦ #(tR, tC)`.
#[derive(Clone, Debug, Serialize)]
pub struct EhrhartVolume {
    /// Leading coefficient: volume in units of the lattice covolume.
    #[serde(serialize_with = "as_fraction")]
    pub leading_coeff: BigRational,
    pub covolume: f64,
    pub euclidean_volume: f64,
    /// `(m-1)(n-1)`.
    pub degree: usize,
    /// Counts at dilations `1..=degree+2`.
    #[serde(serialize_with = "as_decimals")]
    pub counts: Vec<BigUint>,
    /// The interpolant through dilations `1..=degree+1` reproduces the count at `degree+2`.
    pub certified: bool,
}

fn as_fraction<S: Serializer>(v: &BigRational, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&format!("{}/{}", v.numer(), v.denom()))
}

fn as_decimals<S: Serializer>(v: &[BigUint], s: S) -> std::result::Result<S::Ok, S::Error> {
    s.collect_seq(v.iter().map(|x| x.to_str_radix(10)))
}

pub fn ehrhart_volume(margins: &MarginPair) -> Result<EhrhartVolume> {
    ehrhart_volume_with_budget(margins, DEFAULT_BUDGET)
}

pub fn ehrhart_volume_with_budget(margins: &MarginPair, budget: f64) -> Result<EhrhartVolume> {
    let (m, n) = (margins.m(), margins.n());
    let degree = (m.max(1) - 1) * (n.max(1) - 1);
    if degree == 0 {
        return Err(Error::InvalidDimension("polytope is a point".into()));
    }
    let counts = (1..=degree as u64 + 2)
        .map(|t| Ok(count_dp(&margins.dilate(t)?, None, budget)?.value))
        .collect::<Result<Vec<_>>>()?;

    // forward differences of the values at t = 1..=degree+1
    let mut diffs: Vec<BigInt> = counts[..=degree].iter().map(|c| BigInt::from(c.clone())).collect();
    let mut leading = Vec::with_capacity(degree + 1);
    leading.push(diffs[0].clone());
    for _ in 0..degree {
        diffs = diffs.windows(2).map(|w| &w[1] - &w[0]).collect();
        leading.push(diffs[0].clone());
    }
    // Newton form: f(1 + k) = Σ_j C(k, j) Δ^j f(1), evaluated at k = degree + 1
    let k = degree as u64 + 1;
    let predicted: BigInt = leading
        .iter()
        .enumerate()
        .map(|(j, d)| BigInt::from(crate::special::binomial(k, j as u64)) * d)
        .sum();
    let certified = predicted == BigInt::from(counts[degree + 1].clone());

    let factorial: BigInt = (1..=degree as u64).map(BigInt::from).product();
    let leading_coeff = BigRational::new(leading[degree].clone(), factorial);
    let covolume = lattice_covolume(m, n)?;
    let euclidean_volume = leading_coeff.to_f64().unwrap_or(f64::NAN) * covolume;
    Ok(EhrhartVolume {
        leading_coeff,
        covolume,
        euclidean_volume,
        degree,
        counts,
        certified,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::margins::MarginOptions;
    use crate::matrix::Matrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn pair(r: &[u64], c: &[u64]) -> MarginPair {
        MarginPair::new(r, c).unwrap()
    }

    fn big(x: u64) -> BigUint {
        BigUint::from(x)
    }

    #[test]
    fn small_counts() {
        assert_eq!(exact_count(&pair(&[1, 1], &[1, 1])).unwrap().value, big(2));
        assert_eq!(exact_count(&pair(&[2, 1], &[2, 1])).unwrap().value, big(2));
        assert_eq!(exact_count(&pair(&[2, 2], &[2, 2])).unwrap().value, big(3));
        // 3x3 magic squares of line sum 1 and 2: 3! permutations, 21 tables
        assert_eq!(exact_count(&pair(&[1, 1, 1], &[1, 1, 1])).unwrap().value, big(6));
        assert_eq!(exact_count(&pair(&[2, 2, 2], &[2, 2, 2])).unwrap().value, big(21));
    }

    #[test]
    fn log_of_counts() {
        let c = |v: BigUint| ExactCount { value: v, method: CountMethod::Dp };
        assert!((c(big(1_225_914_276_768_514)).ln_value() - 34.742_463_308_910_39).abs() < 1e-9);
        let huge = BigUint::from(3u8).pow(2000);
        assert!((c(huge).ln_value() - 2000.0 * 3f64.ln()).abs() < 1e-9 * 2000.0);
        assert_eq!(c(big(0)).ln_value(), f64::NEG_INFINITY);
    }

    #[test]
    fn four_by_four_fixture() {
        let m = pair(&[220, 215, 93, 64], &[108, 286, 71, 127]);
        let c = exact_count(&m).unwrap();
        assert_eq!(c.value, big(1_225_914_276_768_514));
        assert_eq!(c.method, CountMethod::Dp);
    }

    #[test]
    fn budget_is_reported() {
        let m = pair(&[220, 215, 93, 64], &[108, 286, 71, 127]);
        match exact_count_with_budget(&m, 1e6) {
            Err(Error::BudgetExceeded { estimate, budget }) => {
                assert!(estimate > 1e8);
                assert_eq!(budget, 1e6);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn overflow_falls_back_to_big_integers() {
        // 2 x 40 with column sums 10: the count is the coefficient of x^200
        // in (1 + x + ... + x^10)^40, which exceeds u128
        let cols = vec![10u64; 40];
        let m = pair(&[200, 200], &cols);
        let value = exact_count(&m).unwrap().value;
        let mut poly = vec![big(1)];
        for _ in 0..40 {
            let mut next = vec![big(0); poly.len() + 10];
            for (k, a) in poly.iter().enumerate() {
                for d in 0..=10 {
                    next[k + d] += a;
                }
            }
            poly = next;
        }
        assert_eq!(value, poly[200]);
        assert!(value > BigUint::from(u128::MAX));
    }

    #[test]
    fn patterns() {
        let m = pair(&[1, 1], &[1, 1]);
        let p = WeightMatrix::from_rows(&[vec![1.0, 1.0], vec![1.0, 0.0]]).unwrap();
        assert_eq!(exact_count_weighted(&m, &p).unwrap().value, big(1));
        assert_eq!(brute_force_count(&m, Some(&p)).unwrap().value, big(1));
        let ones = WeightMatrix::ones(2, 2);
        assert_eq!(exact_count_weighted(&m, &ones).unwrap().value, big(2));
        // staircase w_ij = 1[j ≤ i+1], 0-based: j ≤ i + 1 excludes nothing for 2x2
        let kostant = WeightMatrix::new(Matrix::from_fn(2, 2, |i, j| if j <= i + 1 { 1.0 } else { 0.0 })).unwrap();
        assert_eq!(exact_count_weighted(&m, &kostant).unwrap().value, big(2));
        let bad = WeightMatrix::from_rows(&[vec![1.0, 0.5], vec![1.0, 1.0]]).unwrap();
        assert!(exact_count_weighted(&m, &bad).is_err());
    }

    #[test]
    fn brute_force_examples() {
        assert_eq!(brute_force_count(&pair(&[1, 1], &[1, 1]), None).unwrap().value, big(2));
        assert_eq!(brute_force_count(&pair(&[2, 1], &[2, 1]), None).unwrap().value, big(2));
        let m = pair(&[220, 215, 93, 64], &[108, 286, 71, 127]);
        assert!(matches!(brute_force_count(&m, None), Err(Error::BudgetExceeded { .. })));
    }

    fn random_composition(rng: &mut ChaCha8Rng, total: u64, parts: usize) -> Vec<u64> {
        let mut v = vec![1u64; parts];
        for _ in 0..total - parts as u64 {
            v[rng.random_range(0..parts)] += 1;
        }
        v
    }

    #[test]
    fn dp_agrees_with_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let m = rng.random_range(2..=3);
            let n = rng.random_range(2..=3);
            let total = rng.random_range(m.max(n) as u64..=12);
            let margins = pair(&random_composition(&mut rng, total, m), &random_composition(&mut rng, total, n));
            let pattern = if rng.random_bool(0.5) {
                Some(WeightMatrix::new(Matrix::from_fn(m, n, |_, _| if rng.random_bool(0.8) { 1.0 } else { 0.0 })).unwrap())
            } else {
                None
            };
            let dp = match &pattern {
                Some(p) => exact_count_weighted(&margins, p).unwrap(),
                None => exact_count(&margins).unwrap(),
            };
            let brute = brute_force_count(&margins, pattern.as_ref()).unwrap();
            assert_eq!(dp.value, brute.value, "{margins:?} {pattern:?}");
            let t = margins.transpose();
            let dpt = match &pattern {
                Some(p) => exact_count_weighted(&t, &p.transpose()).unwrap(),
                None => exact_count(&t).unwrap(),
            };
            assert_eq!(dp.value, dpt.value);
        }
    }

    #[test]
    fn wider_tables_match_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..30 {
            let m = rng.random_range(2..=3);
            let n = rng.random_range(4..=6);
            let total = rng.random_range(n as u64..=9);
            let margins = pair(&random_composition(&mut rng, total, m), &random_composition(&mut rng, total, n));
            assert_eq!(
                exact_count(&margins).unwrap().value,
                brute_force_count(&margins, None).unwrap().value
            );
        }
    }

    #[test]
    fn patterns_and_repeated_sums_on_wide_tables() {
        // wide tables exercise the three-column blocks and the row grouping
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        for k in 0..60 {
            let m = rng.random_range(2..=3);
            let n = rng.random_range(3..=7);
            let total = rng.random_range(n as u64..=10);
            let rows = if k % 2 == 0 && total % m as u64 == 0 {
                vec![total / m as u64; m]
            } else {
                random_composition(&mut rng, total, m)
            };
            let margins = pair(&rows, &random_composition(&mut rng, total, n));
            let pattern = WeightMatrix::new(crate::Matrix::from_fn(m, n, |_, _| {
                if rng.random_bool(0.75) { 1.0 } else { 0.0 }
            }))
            .unwrap();
            assert_eq!(
                exact_count_weighted(&margins, &pattern).unwrap().value,
                brute_force_count(&margins, Some(&pattern)).unwrap().value,
                "{margins:?} {pattern:?}"
            );
            assert_eq!(
                exact_count(&margins).unwrap().value,
                brute_force_count(&margins, None).unwrap().value
            );
        }
    }

    #[test]
    fn more_allowed_cells_never_decrease_the_count() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..50 {
            let margins = pair(&random_composition(&mut rng, 9, 3), &random_composition(&mut rng, 9, 3));
            let mut cells: Vec<f64> = (0..9).map(|_| if rng.random_bool(0.5) { 1.0 } else { 0.0 }).collect();
            let before = exact_count_weighted(&margins, &WeightMatrix::new(Matrix::from_fn(3, 3, |i, j| cells[i * 3 + j])).unwrap()).unwrap();
            cells[rng.random_range(0..9)] = 1.0;
            let after = exact_count_weighted(&margins, &WeightMatrix::new(Matrix::from_fn(3, 3, |i, j| cells[i * 3 + j])).unwrap()).unwrap();
            assert!(after.value >= before.value);
        }
    }

    #[test]
    fn degenerate_margins_count() {
        let relaxed = MarginOptions { allow_degenerate: true };
        let m = MarginPair::with_options(&[3], &[1, 2], relaxed).unwrap();
        assert_eq!(exact_count(&m).unwrap().value, big(1));
        let m = MarginPair::with_options(&[2, 0], &[1, 1], relaxed).unwrap();
        assert_eq!(exact_count(&m).unwrap().value, big(1));
        assert_eq!(brute_force_count(&m, None).unwrap().value, big(1));
    }

    #[test]
    fn covolumes() {
        assert!((lattice_covolume(2, 2).unwrap() - 2.0).abs() < 1e-12);
        assert!((lattice_covolume(2, 3).unwrap() - 2.0 * 3f64.sqrt()).abs() < 1e-12);
        for (m, n) in [(3usize, 3usize), (3, 4), (4, 2), (5, 3)] {
            let closed = ((m as f64).powi(n as i32 - 1) * (n as f64).powi(m as i32 - 1)).sqrt();
            assert!((lattice_covolume(m, n).unwrap() - closed).abs() < 1e-9 * closed);
        }
        assert!(lattice_covolume(1, 3).is_err());
    }

    #[test]
    fn covolume_is_basis_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        for (m, n) in [(2usize, 3usize), (3, 3), (3, 4)] {
            let mut basis = zero_margin_basis(m, n);
            let k = basis.len();
            let reference = gram_determinant(&basis).sqrt();
            // random elementary row operations and swaps keep |det| = 1
            for _ in 0..20 {
                let a = rng.random_range(0..k);
                let b = rng.random_range(0..k);
                if a == b {
                    continue;
                }
                let factor = rng.random_range(-2i32..=2) as f64;
                let src = basis[b].clone();
                for (x, y) in basis[a].iter_mut().zip(&src) {
                    *x += factor * y;
                }
                if rng.random_bool(0.3) {
                    basis.swap(a, b);
                }
            }
            let changed = gram_determinant(&basis).sqrt();
            assert!((changed - reference).abs() < 1e-9 * reference);
        }
    }

    #[test]
    fn ehrhart_segments() {
        let v = ehrhart_volume(&pair(&[1, 1], &[1, 1])).unwrap();
        assert_eq!(v.degree, 1);
        assert_eq!(v.counts[..2], [big(2), big(3)]);
        assert_eq!(v.leading_coeff, BigRational::from_integer(BigInt::from(1)));
        assert!((v.euclidean_volume - 2.0).abs() < 1e-12);
        assert!(v.certified);

        let v = ehrhart_volume(&pair(&[2, 2], &[2, 2])).unwrap();
        assert!((v.euclidean_volume - 4.0).abs() < 1e-12);
    }

    #[test]
    fn ehrhart_birkhoff_three() {
        // the Birkhoff polytope B_3 has normalized volume 3/2 (lattice-point
        // polynomial (t+1)(t+2)(t^2+3t+4)/8 ⇒ leading coefficient 1/8)
        let v = ehrhart_volume(&pair(&[1, 1, 1], &[1, 1, 1])).unwrap();
        assert_eq!(v.degree, 4);
        assert!(v.certified);
        assert_eq!(v.leading_coeff, BigRational::new(BigInt::from(1), BigInt::from(8)));
        assert_eq!(v.counts[0], big(6));
        assert_eq!(v.counts[1], big(21));
        assert!((v.euclidean_volume - 9.0 / 8.0).abs() < 1e-12);
    }
}
