//! Dense feature storage and the distance kernels shared by every module.

use serde::{Deserialize, Serialize};

use crate::error::{ensure, Result};

/// Row-major `rows × dims` matrix of single-precision features.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMatrix {
    dims: usize,
    data: Vec<f32>,
}

impl FeatureMatrix {
    pub fn new(dims: usize, data: Vec<f32>) -> Result<Self> {
        ensure!(dims > 0, Validation, "feature dimension must be positive");
        ensure!(data.len() % dims == 0, Format, "{} values cannot be split into rows of {} dims", data.len(), dims);
        Ok(Self { dims, data })
    }

    pub fn from_rows<R: AsRef<[f32]>>(rows: &[R]) -> Result<Self> {
        ensure!(!rows.is_empty(), Validation, "cannot infer dims from zero rows");
        let dims = rows[0].as_ref().len();
        let mut data = Vec::with_capacity(dims * rows.len());
        for row in rows {
            let row = row.as_ref();
            ensure!(row.len() == dims, Format, "ragged rows: {} vs {}", row.len(), dims);
            data.extend_from_slice(row);
        }
        Self::new(dims, data)
    }

    pub fn empty(dims: usize) -> Self {
        Self { dims, data: Vec::new() }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.data.len() / self.dims
    }

    #[inline]
    pub fn dims(&self) -> usize {
        self.dims
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.dims..(i + 1) * self.dims]
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.data
    }

    pub fn iter_rows(&self) -> std::slice::ChunksExact<'_, f32> {
        self.data.chunks_exact(self.dims)
    }

    /// Copies the given rows, in the given order, into a new matrix.
    pub fn gather(&self, rows: &[usize]) -> Self {
        let mut data = Vec::with_capacity(rows.len() * self.dims);
        for &r in rows {
            data.extend_from_slice(self.row(r));
        }
        Self { dims: self.dims, data }
    }

    pub fn push_row(&mut self, row: &[f32]) {
        assert_eq!(row.len(), self.dims, "row width mismatch");
        self.data.extend_from_slice(row);
    }

    /// Every value multiplied by `factor`.
    pub fn scaled(&self, factor: f32) -> Self {
        Self { dims: self.dims, data: self.data.iter().map(|v| v * factor).collect() }
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

/// Distance used for nearest-neighbour ranking.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Metric {
    #[default]
    Euclidean,
    Cosine,
}

impl Metric {
    /// A strictly increasing transform of [`Metric::distance`], cheaper to
    /// evaluate. Squared length for euclidean; the cosine distance itself
    /// for cosine.
    #[inline]
    pub fn rank_distance(self, a: &[f32], b: &[f32]) -> f64 {
        match self {
            Metric::Euclidean => squared_euclidean(a, b),
            Metric::Cosine => cosine_distance(a, b),
        }
    }

    #[inline]
    pub fn distance(self, a: &[f32], b: &[f32]) -> f64 {
        match self {
            Metric::Euclidean => squared_euclidean(a, b).sqrt(),
            Metric::Cosine => cosine_distance(a, b),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Metric::Euclidean => "euclidean",
            Metric::Cosine => "cosine",
        }
    }
}

impl std::str::FromStr for Metric {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "euclidean" => Ok(Metric::Euclidean),
            "cosine" => Ok(Metric::Cosine),
            other => Err(crate::Error::Validation(format!("unknown metric `{other}`"))),
        }
    }
}

/// Squared euclidean distance accumulated in double precision.
///
/// Differences of two `f32` values and their squares are exact in `f64`, so
/// only the running sum rounds. Four independent accumulators let the
/// compiler vectorise the loop; the summation order is fixed.
#[inline]
pub fn squared_euclidean(a: &[f32], b: &[f32]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0f64; 4];
    let mut ca = a.chunks_exact(4);
    let mut cb = b.chunks_exact(4);
    for (x, y) in (&mut ca).zip(&mut cb) {
        for lane in 0..4 {
            let d = x[lane] as f64 - y[lane] as f64;
            acc[lane] += d * d;
        }
    }
    let mut tail = 0f64;
    for (x, y) in ca.remainder().iter().zip(cb.remainder()) {
        let d = *x as f64 - *y as f64;
        tail += d * d;
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// `1 - cos(a, b)`; defined as 1 when either vector has zero norm.
pub fn cosine_distance(a: &[f32], b: &[f32]) -> f64 {
    let (mut dot, mut na, mut nb) = (0f64, 0f64, 0f64);
    for (x, y) in a.iter().zip(b) {
        let (x, y) = (*x as f64, *y as f64);
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if na == 0.0 || nb == 0.0 {
        return 1.0;
    }
    1.0 - dot / (na.sqrt() * nb.sqrt())
}

/// Points identified by stable ids; no labels attached.
#[derive(Clone, Debug, PartialEq)]
pub struct PointSet {
    pub ids: Vec<u64>,
    pub features: FeatureMatrix,
}

impl PointSet {
    pub fn new(ids: Vec<u64>, features: FeatureMatrix) -> Result<Self> {
        ensure!(ids.len() == features.rows(), Validation, "{} ids for {} feature rows", ids.len(), features.rows());
        Ok(Self { ids, features })
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f32] {
        self.features.row(i)
    }

    pub fn dims(&self) -> usize {
        self.features.dims()
    }

    /// Rows at the given positions, in the given order.
    pub fn subset(&self, positions: &[usize]) -> Self {
        Self { ids: positions.iter().map(|&p| self.ids[p]).collect(), features: self.features.gather(positions) }
    }
}

/// Points with revealed class labels in `[0, num_classes)`.
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledSet {
    pub points: PointSet,
    pub labels: Vec<u32>,
    pub num_classes: u32,
}

impl LabeledSet {
    pub fn new(points: PointSet, labels: Vec<u32>, num_classes: u32) -> Result<Self> {
        ensure!(num_classes >= 2, Validation, "need at least two classes, got {num_classes}");
        ensure!(labels.len() == points.len(), Validation, "{} labels for {} points", labels.len(), points.len());
        if let Some(bad) = labels.iter().find(|&&l| l >= num_classes) {
            return Err(crate::Error::Validation(format!("label {bad} out of range for {num_classes} classes")));
        }
        Ok(Self { points, labels, num_classes })
    }

    /// Convenience constructor used heavily in tests and examples: ids are
    /// `0..rows.len()`.
    pub fn from_rows<R: AsRef<[f32]>>(rows: &[R], labels: &[u32], num_classes: u32) -> Result<Self> {
        let features = FeatureMatrix::from_rows(rows)?;
        let ids = (0..features.rows() as u64).collect();
        Self::new(PointSet::new(ids, features)?, labels.to_vec(), num_classes)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    #[inline]
    pub fn id(&self, i: usize) -> u64 {
        self.points.ids[i]
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f32] {
        self.points.row(i)
    }

    pub fn ids(&self) -> &[u64] {
        &self.points.ids
    }

    pub fn subset(&self, positions: &[usize]) -> Self {
        Self {
            points: self.points.subset(positions),
            labels: positions.iter().map(|&p| self.labels[p]).collect(),
            num_classes: self.num_classes,
        }
    }

    /// Concatenation of two sets over the same label space.
    pub fn concat(&self, other: &LabeledSet) -> Result<Self> {
        ensure!(self.points.dims() == other.points.dims(), Validation, "dimension mismatch");
        let mut ids = self.points.ids.clone();
        ids.extend_from_slice(&other.points.ids);
        let mut data = self.points.features.as_slice().to_vec();
        data.extend_from_slice(other.points.features.as_slice());
        let mut labels = self.labels.clone();
        labels.extend_from_slice(&other.labels);
        Self::new(
            PointSet::new(ids, FeatureMatrix::new(self.points.dims(), data)?)?,
            labels,
            self.num_classes.max(other.num_classes),
        )
    }
}

/// Positions of `points` sorted by increasing distance to `query`, ties
/// broken by ascending point id.
pub fn neighbor_order(query: &[f32], points: &PointSet, metric: Metric) -> Vec<(f64, usize)> {
    let mut keyed: Vec<(f64, u64, usize)> = points
        .features
        .iter_rows()
        .enumerate()
        .map(|(i, row)| (metric.rank_distance(query, row), points.ids[i], i))
        .collect();
    keyed.sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    keyed.into_iter().map(|(d, _, i)| (d, i)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn squared_euclidean_matches_naive() {
        let a: Vec<f32> = (0..11).map(|i| i as f32 * 0.5).collect();
        let b: Vec<f32> = (0..11).map(|i| (i * i) as f32 * 0.1).collect();
        let naive: f64 = a.iter().zip(&b).map(|(x, y)| (*x as f64 - *y as f64).powi(2)).sum();
        assert!((squared_euclidean(&a, &b) - naive).abs() < 1e-9);
    }

    #[test]
    fn cosine_handles_zero_vectors() {
        assert_eq!(cosine_distance(&[0.0, 0.0], &[1.0, 2.0]), 1.0);
        assert!(cosine_distance(&[1.0, 0.0], &[2.0, 0.0]).abs() < 1e-15);
        assert!((cosine_distance(&[1.0, 0.0], &[0.0, 3.0]) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn neighbor_order_breaks_ties_by_id() {
        let features = FeatureMatrix::from_rows(&[[1.0f32], [-1.0], [0.5]]).unwrap();
        let points = PointSet::new(vec![9, 3, 7], features).unwrap();
        let order: Vec<u64> =
            neighbor_order(&[0.0], &points, Metric::Euclidean).into_iter().map(|(_, i)| points.ids[i]).collect();
        assert_eq!(order, vec![7, 3, 9]);
    }

    #[test]
    fn ragged_rows_are_rejected() {
        let rows: Vec<Vec<f32>> = vec![vec![1.0, 2.0], vec![3.0]];
        assert!(FeatureMatrix::from_rows(&rows).is_err());
    }

    #[test]
    fn label_range_is_checked() {
        assert!(LabeledSet::from_rows(&[[0.0f32]], &[3], 3).is_err());
        assert!(LabeledSet::from_rows(&[[0.0f32]], &[0], 1).is_err());
    }
}
