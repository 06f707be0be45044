//! Fixtures shared by the integration tests.
#![allow(dead_code)]

use itertools::Itertools;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use shapley_select::selection::cover_radius;
use shapley_select::{FeatureMatrix, LabeledSet, PointSet};

/// `n` uniform points in `[-1, 1]^d` with ids starting at `first_id`.
pub fn random_points(rng: &mut ChaCha8Rng, n: usize, d: usize, first_id: u64) -> PointSet {
    let rows: Vec<Vec<f32>> = (0..n).map(|_| (0..d).map(|_| rng.random_range(-1.0f32..1.0)).collect()).collect();
    PointSet::new((first_id..first_id + n as u64).collect(), FeatureMatrix::from_rows(&rows).unwrap()).unwrap()
}

pub fn random_labeled(rng: &mut ChaCha8Rng, n: usize, d: usize, classes: u32, first_id: u64) -> LabeledSet {
    let points = random_points(rng, n, d, first_id);
    let labels = (0..n).map(|_| rng.random_range(0..classes)).collect();
    LabeledSet::new(points, labels, classes).unwrap()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Pool rows whose ids are in `ids`.
pub fn centers(pool: &PointSet, ids: &[u64]) -> PointSet {
    let positions: Vec<usize> = ids.iter().map(|id| pool.ids.iter().position(|p| p == id).unwrap()).collect();
    pool.subset(&positions)
}

/// Smallest cover radius over every `b`-subset of the pool.
pub fn optimal_cover_radius(pool: &PointSet, b: usize) -> f64 {
    (0..pool.len()).combinations(b).map(|c| cover_radius(pool, &pool.subset(&c))).fold(f64::INFINITY, f64::min)
}

/// Mean and sample standard deviation.
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = if xs.len() < 2 { 0.0 } else { xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0) };
    (mean, var.sqrt())
}

pub fn pooled_std(a: &[f64], b: &[f64]) -> f64 {
    let (_, sa) = mean_std(a);
    let (_, sb) = mean_std(b);
    ((sa * sa + sb * sb) / 2.0).sqrt()
}
