#![allow(dead_code)]

use ctbounds::MarginPair;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Uniform-ish composition of `total` into `parts` positive integers.
pub fn composition(rng: &mut ChaCha8Rng, total: u64, parts: usize) -> Vec<u64> {
    assert!(total >= parts as u64);
    let mut v = vec![1u64; parts];
    for _ in 0..total - parts as u64 {
        v[rng.random_range(0..parts)] += 1;
    }
    v
}

pub fn random_margins(rng: &mut ChaCha8Rng, m: usize, n: usize, total: u64) -> MarginPair {
    MarginPair::new(&composition(rng, total, m), &composition(rng, total, n)).unwrap()
}

/// Random margins where neither the rows nor the columns are all equal.
pub fn non_constant_margins(rng: &mut ChaCha8Rng, m: usize, n: usize, total: u64) -> MarginPair {
    loop {
        let mp = random_margins(rng, m, n, total);
        if !mp.rows_constant() && !mp.cols_constant() {
            return mp;
        }
    }
}

/// All compositions of `total` into `parts` positive integers.
pub fn all_compositions(total: u64, parts: usize) -> Vec<Vec<u64>> {
    fn go(left: u64, parts: usize, prefix: &mut Vec<u64>, out: &mut Vec<Vec<u64>>) {
        if parts == 1 {
            prefix.push(left);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for x in 1..=left - (parts as u64 - 1) {
            prefix.push(x);
            go(left - x, parts - 1, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    if total >= parts as u64 {
        go(total, parts, &mut Vec::new(), &mut out);
    }
    out
}
