//! Pairwise summation with a fixed reduction tree.
//!
//! The tree depends only on the input length, so results are bit-identical
//! across runs and thread counts.

const BLOCK: usize = 64;

/// Pairwise sum of a slice.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    if values.len() <= BLOCK {
        let mut acc = 0.0;
        for v in values {
            acc += v;
        }
        return acc;
    }
    let mid = split_point(values.len());
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

/// Pairwise sum of `f(i)` for `i in 0..n` without materializing the terms.
pub fn pairwise_sum_by(n: usize, f: &impl Fn(usize) -> f64) -> f64 {
    sum_range(0, n, f)
}

fn sum_range(lo: usize, hi: usize, f: &impl Fn(usize) -> f64) -> f64 {
    if hi - lo <= BLOCK {
        let mut acc = 0.0;
        for i in lo..hi {
            acc += f(i);
        }
        return acc;
    }
    let mid = lo + split_point(hi - lo);
    sum_range(lo, mid, f) + sum_range(mid, hi, f)
}

// Split at a multiple of BLOCK so leaf blocks line up with chunked parallel sums.
fn split_point(len: usize) -> usize {
    let blocks = len.div_ceil(BLOCK);
    (blocks / 2).max(1) * BLOCK
}
