//! Deterministic parallel reductions.
//!
//! The index range is split recursively at its midpoint until blocks are at
//! most [`LEAF`] long. The split points depend only on the length, so the
//! floating-point combination order is identical for every thread count.

use rayon::join;
use std::ops::Range;

/// Largest block summed sequentially.
pub const LEAF: usize = 256;

/// Reduces `0..n` with a fixed combination tree.
///
/// `leaf` folds a contiguous block; `combine` merges left and right results.
/// Returns `None` for an empty range.
pub fn tree_reduce<T, F, G>(n: usize, leaf: &F, combine: &G) -> Option<T>
where
    T: Send,
    F: Fn(Range<usize>) -> T + Sync,
    G: Fn(T, T) -> T + Sync,
{
    if n == 0 {
        return None;
    }
    Some(reduce_range(0..n, leaf, combine))
}

fn reduce_range<T, F, G>(r: Range<usize>, leaf: &F, combine: &G) -> T
where
    T: Send,
    F: Fn(Range<usize>) -> T + Sync,
    G: Fn(T, T) -> T + Sync,
{
    let len = r.end - r.start;
    if len <= LEAF {
        return leaf(r);
    }
    let mid = r.start + len / 2;
    let (a, b) = join(|| reduce_range(r.start..mid, leaf, combine), || reduce_range(mid..r.end, leaf, combine));
    combine(a, b)
}

/// Pairwise sum of `f(i)` over `0..n`.
pub fn tree_sum_by<F>(n: usize, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync,
{
    tree_reduce(n, &|r: Range<usize>| r.map(&f).sum::<f64>(), &|a, b| a + b).unwrap_or(0.0)
}

/// Pairwise sum of a slice.
pub fn tree_sum(values: &[f64]) -> f64 {
    tree_sum_by(values.len(), |i| values[i])
}

/// Pairwise weighted sum `Σ w_i v_i`.
pub fn tree_dot(weights: &[f64], values: &[f64]) -> f64 {
    debug_assert_eq!(weights.len(), values.len());
    tree_sum_by(values.len(), |i| weights[i] * values[i])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_and_small() {
        assert_eq!(tree_sum(&[]), 0.0);
        assert_eq!(tree_sum(&[1.5]), 1.5);
        assert_eq!(tree_sum(&[1.0, 2.0, 3.0]), 6.0);
    }

    #[test]
    fn independent_of_pool_size() {
        let v: Vec<f64> = (0..100_003).map(|i| ((i as f64) * 0.37).sin() * 1e3).collect();
        let run =
            |threads| rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap().install(|| tree_sum(&v));
        let a = run(1);
        assert_eq!(a.to_bits(), run(3).to_bits());
        assert_eq!(a.to_bits(), run(8).to_bits());
    }

    #[test]
    fn matches_compensated_sum() {
        let v: Vec<f64> = (1..50_000).map(|i| 1.0 / (i as f64).powi(2)).collect();
        let exact = std::f64::consts::PI.powi(2) / 6.0 - 1.0 / 49_999.5;
        assert!((tree_sum(&v) - exact).abs() < 1e-12);
    }
}
