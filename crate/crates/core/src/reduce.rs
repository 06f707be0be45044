//! Reductions whose rounding does not depend on the thread count.
//!
//! Every reduction here splits its index range at fixed midpoints, so the
//! tree of additions is a function of the input length only. Rayon may run
//! the two halves on different workers, but the values combined at each node
//! are always the same.

use std::ops::Range;

/// Ranges at or below this length are folded sequentially.
const SEQUENTIAL_SPAN: usize = 1;

/// Folds `leaf(i)` over `range` with a balanced binary tree of `combine`
/// calls, evaluating independent subtrees in parallel.
///
/// Panics if the range is empty.
pub fn tree_fold<T, L, C>(range: Range<usize>, leaf: &L, combine: &C) -> T
where
    T: Send,
    L: Fn(usize) -> T + Sync,
    C: Fn(T, T) -> T + Sync,
{
    assert!(range.start < range.end, "tree_fold over an empty range");
    let len = range.end - range.start;
    if len <= SEQUENTIAL_SPAN {
        return leaf(range.start);
    }
    let mid = range.start + len / 2;
    let (left, right) =
        rayon::join(|| tree_fold(range.start..mid, leaf, combine), || tree_fold(mid..range.end, leaf, combine));
    combine(left, right)
}

/// Pairwise sum; `0.0` for an empty slice.
pub fn tree_sum(values: &[f64]) -> f64 {
    fn rec(v: &[f64]) -> f64 {
        match v.len() {
            0 => 0.0,
            1 => v[0],
            n => {
                let (a, b) = v.split_at(n / 2);
                rec(a) + rec(b)
            }
        }
    }
    rec(values)
}

pub fn tree_mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    tree_sum(values) / values.len() as f64
}

/// Element-wise sum of equal-length vectors produced by `leaf(i)` for every
/// `i` in `0..count`.
pub fn tree_sum_vectors<L>(count: usize, leaf: L) -> Vec<f64>
where
    L: Fn(usize) -> Vec<f64> + Sync,
{
    tree_fold(0..count, &leaf, &|mut a: Vec<f64>, b: Vec<f64>| {
        for (x, y) in a.iter_mut().zip(b) {
            *x += y;
        }
        a
    })
}

/// Sample mean and (n-1)-normalised standard deviation. The deviation is 0
/// for fewer than two samples.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = tree_mean(values);
    if n < 2 {
        return (mean, 0.0);
    }
    let sq: Vec<f64> = values.iter().map(|v| (v - mean) * (v - mean)).collect();
    (mean, (tree_sum(&sq) / (n - 1) as f64).sqrt())
}
