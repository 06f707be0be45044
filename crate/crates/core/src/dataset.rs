//! Feature-space datasets, their split bookkeeping, and the on-disk format.
//!
//! A dataset on disk is a pair of files: a JSON manifest and a blob of
//! little-endian `f32` values in row-major order. The manifest names the blob
//! by a path relative to itself.
//!
//! ```json
//! {
//!   "format_version": 1,
//!   "features": "pool.f32",
//!   "n_points": 4,
//!   "dims": 2,
//!   "num_classes": 2,
//!   "point_ids": [0, 1, 2, 3],
//!   "labels": [0, 1, 0, 1],
//!   "splits": { "labeled": [0], "unlabeled": [1], "validation": [2], "test": [3] }
//! }
//! ```
//!
//! Labels of unlabeled points are stored like any other label. They stand in
//! for the human annotator and are meant to be read through
//! [`reveal_labels`] only.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};
use crate::fsio;
use crate::points::{FeatureMatrix, LabeledSet, PointSet};

pub const FORMAT_VERSION: u32 = 1;

/// Immutable feature matrix plus ground-truth labels.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureDataset {
    features: FeatureMatrix,
    labels: Vec<u32>,
    num_classes: u32,
    point_ids: Vec<u64>,
    position: HashMap<u64, usize>,
}

impl FeatureDataset {
    pub fn new(features: FeatureMatrix, labels: Vec<u32>, num_classes: u32, point_ids: Vec<u64>) -> Result<Self> {
        ensure!(num_classes >= 2, Validation, "num_classes must be at least 2, got {num_classes}");
        ensure!(
            features.rows() == labels.len() && labels.len() == point_ids.len(),
            Validation,
            "row count {} , label count {} and id count {} differ",
            features.rows(),
            labels.len(),
            point_ids.len()
        );
        if let Some((i, l)) = labels.iter().enumerate().find(|(_, &l)| l >= num_classes) {
            return Err(Error::Validation(format!(
                "label {l} of point {} is outside [0, {num_classes})",
                point_ids[i]
            )));
        }
        ensure!(features.all_finite(), Validation, "features contain NaN or infinite values");
        let mut position = HashMap::with_capacity(point_ids.len());
        for (i, &id) in point_ids.iter().enumerate() {
            if position.insert(id, i).is_some() {
                return Err(Error::Validation(format!("duplicate point id {id}")));
            }
        }
        Ok(Self { features, labels, num_classes, point_ids, position })
    }

    pub fn len(&self) -> usize {
        self.point_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.point_ids.is_empty()
    }

    pub fn dims(&self) -> usize {
        self.features.dims()
    }

    pub fn num_classes(&self) -> u32 {
        self.num_classes
    }

    pub fn features(&self) -> &FeatureMatrix {
        &self.features
    }

    pub fn point_ids(&self) -> &[u64] {
        &self.point_ids
    }

    /// Ground truth for every row, including hidden ones.
    pub fn ground_truth(&self) -> &[u32] {
        &self.labels
    }

    pub fn contains(&self, id: u64) -> bool {
        self.position.contains_key(&id)
    }

    fn positions<'a, I>(&self, ids: I) -> Result<Vec<usize>>
    where
        I: IntoIterator<Item = &'a u64>,
    {
        ids.into_iter()
            .map(|id| self.position.get(id).copied().ok_or_else(|| Error::Validation(format!("unknown point id {id}"))))
            .collect()
    }

    /// Features of the given points, in the given order.
    pub fn points<'a, I>(&self, ids: I) -> Result<PointSet>
    where
        I: IntoIterator<Item = &'a u64>,
    {
        let pos = self.positions(ids)?;
        Ok(PointSet { ids: pos.iter().map(|&p| self.point_ids[p]).collect(), features: self.features.gather(&pos) })
    }

    /// Features and labels of the given points. Callers are responsible for
    /// only asking for points whose labels are known (labeled, validation or
    /// test splits).
    pub fn labeled<'a, I>(&self, ids: I) -> Result<LabeledSet>
    where
        I: IntoIterator<Item = &'a u64>,
    {
        let pos = self.positions(ids)?;
        LabeledSet::new(
            PointSet { ids: pos.iter().map(|&p| self.point_ids[p]).collect(), features: self.features.gather(&pos) },
            pos.iter().map(|&p| self.labels[p]).collect(),
            self.num_classes,
        )
    }
}

/// Partition of (part of) a dataset into the four roles a point can play.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitAssignment {
    pub labeled: BTreeSet<u64>,
    pub unlabeled: BTreeSet<u64>,
    pub validation: BTreeSet<u64>,
    pub test: BTreeSet<u64>,
}

impl SplitAssignment {
    /// Checks pairwise disjointness and membership in `dataset`.
    pub fn validate(&self, dataset: &FeatureDataset) -> Result<()> {
        let sets = [
            ("labeled", &self.labeled),
            ("unlabeled", &self.unlabeled),
            ("validation", &self.validation),
            ("test", &self.test),
        ];
        for (i, (name_a, a)) in sets.iter().enumerate() {
            if let Some(id) = a.iter().find(|id| !dataset.contains(**id)) {
                return Err(Error::Validation(format!("{name_a} split names unknown id {id}")));
            }
            for (name_b, b) in &sets[i + 1..] {
                if let Some(id) = a.intersection(b).next() {
                    return Err(Error::Validation(format!("point {id} is in both the {name_a} and {name_b} splits")));
                }
            }
        }
        Ok(())
    }

    /// Moves revealed points from the pool into the labeled split.
    pub fn mark_labeled(&mut self, ids: &[u64]) -> Result<()> {
        for id in ids {
            ensure!(self.unlabeled.contains(id), Precondition, "point {id} is not in the unlabeled pool");
        }
        for id in ids {
            self.unlabeled.remove(id);
            self.labeled.insert(*id);
        }
        Ok(())
    }
}

/// The labelling oracle: returns the stored ground truth for points that are
/// currently unlabeled. The caller then moves them with
/// [`SplitAssignment::mark_labeled`].
pub fn reveal_labels(dataset: &FeatureDataset, splits: &SplitAssignment, ids: &[u64]) -> Result<BTreeMap<u64, u32>> {
    let mut out = BTreeMap::new();
    for &id in ids {
        ensure!(
            splits.unlabeled.contains(&id),
            Precondition,
            "cannot reveal point {id}: it is not in the unlabeled pool"
        );
        let pos = dataset.position[&id];
        out.insert(id, dataset.labels[pos]);
    }
    Ok(out)
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Manifest {
    format_version: u32,
    features: PathBuf,
    n_points: usize,
    dims: usize,
    num_classes: u32,
    point_ids: Vec<u64>,
    labels: Vec<u32>,
    splits: SplitAssignment,
}

/// Reads and validates a manifest and its feature blob.
pub fn load_dataset(manifest_path: &Path) -> Result<(FeatureDataset, SplitAssignment)> {
    let text = fsio::read_to_string(manifest_path)?;
    let manifest: Manifest =
        serde_json::from_str(&text).map_err(|e| Error::Format(format!("{}: {e}", manifest_path.display())))?;
    ensure!(
        manifest.format_version == FORMAT_VERSION,
        Format,
        "unsupported format_version {} (expected {FORMAT_VERSION})",
        manifest.format_version
    );
    ensure!(manifest.dims > 0, Format, "dims must be positive");
    let blob_path = manifest_path.parent().unwrap_or_else(|| Path::new(".")).join(&manifest.features);
    let bytes = std::fs::read(&blob_path).map_err(|e| Error::io(&blob_path, e))?;
    let expected = manifest.n_points * manifest.dims * 4;
    ensure!(
        bytes.len() == expected,
        Format,
        "{} holds {} bytes but the manifest declares {} x {} f32 values ({} bytes)",
        blob_path.display(),
        bytes.len(),
        manifest.n_points,
        manifest.dims,
        expected
    );
    ensure!(
        manifest.point_ids.len() == manifest.n_points && manifest.labels.len() == manifest.n_points,
        Format,
        "manifest lists {} ids and {} labels for {} points",
        manifest.point_ids.len(),
        manifest.labels.len(),
        manifest.n_points
    );
    let data: Vec<f32> = bytes.chunks_exact(4).map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]])).collect();
    let dataset = FeatureDataset::new(
        FeatureMatrix::new(manifest.dims, data)?,
        manifest.labels,
        manifest.num_classes,
        manifest.point_ids,
    )?;
    manifest.splits.validate(&dataset)?;
    Ok((dataset, manifest.splits))
}

/// Writes `<stem>.json` and `<stem>.f32` into `dir`; returns the manifest
/// path.
pub fn save_dataset(dataset: &FeatureDataset, splits: &SplitAssignment, dir: &Path, stem: &str) -> Result<PathBuf> {
    let blob_name = format!("{stem}.f32");
    let mut bytes = Vec::with_capacity(dataset.features.as_slice().len() * 4);
    for v in dataset.features.as_slice() {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    fsio::write_atomic(&dir.join(&blob_name), &bytes)?;
    let manifest = Manifest {
        format_version: FORMAT_VERSION,
        features: PathBuf::from(blob_name),
        n_points: dataset.len(),
        dims: dataset.dims(),
        num_classes: dataset.num_classes,
        point_ids: dataset.point_ids.clone(),
        labels: dataset.labels.clone(),
        splits: splits.clone(),
    };
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serialises");
    let manifest_path = dir.join(format!("{stem}.json"));
    fsio::write_atomic(&manifest_path, json.as_bytes())?;
    Ok(manifest_path)
}
