//! Extrapolating Shapley values from labeled points to the unlabeled pool.
//!
//! An unlabeled point has no label, so its value is predicted once per
//! plausible label: one nearest-neighbour regressor per class maps features
//! to the values of that class's labeled points. Plausible labels are the
//! classes that receive votes among the point's nearest labeled neighbours.
//! The per-class predictions are then collapsed to one number, by default
//! with the optimistic maximum.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};
use crate::points::{neighbor_order, LabeledSet, Metric, PointSet};
use crate::valuation::{ValuationMetadata, ValuationMethod, ValuationResult};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Aggregation {
    #[default]
    Max,
    Mean,
    ConfidenceWeighted,
}

impl Aggregation {
    pub fn as_str(self) -> &'static str {
        match self {
            Aggregation::Max => "max",
            Aggregation::Mean => "mean",
            Aggregation::ConfidenceWeighted => "confidence-weighted",
        }
    }
}

impl std::str::FromStr for Aggregation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "max" => Aggregation::Max,
            "mean" => Aggregation::Mean,
            "confidence-weighted" => Aggregation::ConfidenceWeighted,
            other => return Err(Error::Validation(format!("unknown aggregation `{other}`"))),
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RegressionConfig {
    /// Neighbours averaged by each per-class regressor (truncated to the
    /// class size).
    pub k_neighbors: usize,
    pub metric: Metric,
    /// Most candidate labels considered per unlabeled point.
    pub candidate_limit: usize,
    pub aggregation: Aggregation,
}

impl Default for RegressionConfig {
    fn default() -> Self {
        Self { k_neighbors: 10, metric: Metric::Euclidean, candidate_limit: 10, aggregation: Aggregation::Max }
    }
}

impl RegressionConfig {
    pub fn validate(&self) -> Result<()> {
        ensure!(self.k_neighbors >= 1, Validation, "k_neighbors must be at least 1");
        ensure!(self.candidate_limit >= 1, Validation, "candidate_limit must be at least 1");
        Ok(())
    }
}

/// Mean value of the `k` nearest reference points.
#[derive(Clone, Debug)]
pub struct NeighborRegressor {
    points: PointSet,
    values: Vec<f64>,
    k: usize,
    metric: Metric,
}

impl NeighborRegressor {
    fn new(points: PointSet, values: Vec<f64>, k: usize, metric: Metric) -> Self {
        let k = k.min(points.len());
        Self { points, values, k, metric }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn predict(&self, query: &[f32]) -> f64 {
        let order = neighbor_order(query, &self.points, self.metric);
        let sum: f64 = order[..self.k].iter().map(|&(_, p)| self.values[p]).sum();
        sum / self.k as f64
    }
}

/// One regressor per class plus a pooled fallback over every labeled point.
#[derive(Clone, Debug)]
pub struct ValueRegressors {
    per_class: Vec<Option<NeighborRegressor>>,
    global: NeighborRegressor,
}

impl ValueRegressors {
    pub fn num_classes(&self) -> usize {
        self.per_class.len()
    }

    pub fn class(&self, class: u32) -> Option<&NeighborRegressor> {
        self.per_class.get(class as usize).and_then(Option::as_ref)
    }

    pub fn global(&self) -> &NeighborRegressor {
        &self.global
    }
}

fn values_by_position(labeled: &LabeledSet, values: &ValuationResult) -> Result<Vec<f64>> {
    let lookup: HashMap<u64, f64> = values.ids.iter().copied().zip(values.values.iter().copied()).collect();
    labeled
        .ids()
        .iter()
        .map(|id| {
            lookup.get(id).copied().ok_or_else(|| Error::Validation(format!("no Shapley value for labeled point {id}")))
        })
        .collect()
}

/// Fits the per-class nearest-neighbour regressors. Classes without labeled
/// points get no regressor.
pub fn fit_value_regressors(
    labeled: &LabeledSet,
    values: &ValuationResult,
    reg: &RegressionConfig,
) -> Result<ValueRegressors> {
    reg.validate()?;
    ensure!(!labeled.is_empty(), Precondition, "cannot fit value regressors without labeled points");
    let by_pos = values_by_position(labeled, values)?;
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); labeled.num_classes as usize];
    for (p, &l) in labeled.labels.iter().enumerate() {
        members[l as usize].push(p);
    }
    let per_class = members
        .iter()
        .map(|pos| {
            (!pos.is_empty()).then(|| {
                NeighborRegressor::new(
                    labeled.points.subset(pos),
                    pos.iter().map(|&p| by_pos[p]).collect(),
                    reg.k_neighbors,
                    reg.metric,
                )
            })
        })
        .collect();
    let global = NeighborRegressor::new(labeled.points.clone(), by_pos, reg.k_neighbors, reg.metric);
    Ok(ValueRegressors { per_class, global })
}

/// A class and the share of nearest-neighbour votes it received.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassVote {
    pub class: u32,
    pub fraction: f64,
}

fn rank_votes(counts: &[usize], voters: usize, limit: usize) -> Vec<ClassVote> {
    let mut votes: Vec<ClassVote> = counts
        .iter()
        .enumerate()
        .filter(|(_, &c)| c > 0)
        .map(|(class, &c)| ClassVote { class: class as u32, fraction: c as f64 / voters as f64 })
        .collect();
    votes.sort_by(|a, b| b.fraction.total_cmp(&a.fraction).then(a.class.cmp(&b.class)));
    votes.truncate(limit);
    votes
}

/// Classes voted for by the `vote_k` nearest labeled points, most votes
/// first (ties by ascending class id), truncated to `limit`.
pub fn candidate_classes(
    query: &[f32],
    labeled: &LabeledSet,
    vote_k: usize,
    limit: usize,
    metric: Metric,
) -> Result<Vec<ClassVote>> {
    ensure!(limit >= 1, Validation, "candidate limit must be at least 1");
    ensure!(vote_k >= 1, Validation, "vote K must be at least 1");
    ensure!(!labeled.is_empty(), Precondition, "no labeled points to vote");
    let order = neighbor_order(query, &labeled.points, metric);
    let voters = vote_k.min(labeled.len());
    let mut counts = vec![0usize; labeled.num_classes as usize];
    for &(_, p) in &order[..voters] {
        counts[labeled.labels[p] as usize] += 1;
    }
    Ok(rank_votes(&counts, voters, limit))
}

/// Predicted value of one unlabeled point under one hypothetical label.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassValue {
    pub class: u32,
    pub value: f64,
    /// Vote fraction of `class` among the point's nearest labeled points.
    pub confidence: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PointClassValues {
    pub id: u64,
    pub values: Vec<ClassValue>,
}

/// Sparse per-point, per-candidate-class predictions.
#[derive(Clone, Debug, PartialEq)]
pub struct ClassConditionalValues {
    pub points: Vec<PointClassValues>,
    pub candidate_limit: usize,
}

fn predict_one(id: u64, query: &[f32], regressors: &ValueRegressors, candidates: &[ClassVote]) -> PointClassValues {
    let mut values: Vec<ClassValue> = candidates
        .iter()
        .filter_map(|c| {
            regressors.class(c.class).map(|r| ClassValue {
                class: c.class,
                value: r.predict(query),
                confidence: c.fraction,
            })
        })
        .collect();
    if values.is_empty() {
        let top = candidates[0];
        values.push(ClassValue { class: top.class, value: regressors.global.predict(query), confidence: top.fraction });
    }
    PointClassValues { id, values }
}

/// Per-class value predictions for every pool point. Candidate classes
/// without a regressor are skipped; a point left with none is valued by the
/// pooled regressor and filed under its top candidate class.
pub fn predict_values(
    pool: &PointSet,
    regressors: &ValueRegressors,
    candidates: &[Vec<ClassVote>],
) -> Result<ClassConditionalValues> {
    ensure!(
        candidates.len() == pool.len(),
        Validation,
        "{} candidate lists for {} pool points",
        candidates.len(),
        pool.len()
    );
    if let Some(i) = candidates.iter().position(|c| c.is_empty()) {
        return Err(Error::Precondition(format!("pool point {} has no candidate classes", pool.ids[i])));
    }
    let points = (0..pool.len())
        .into_par_iter()
        .map(|i| predict_one(pool.ids[i], pool.row(i), regressors, &candidates[i]))
        .collect();
    Ok(ClassConditionalValues { points, candidate_limit: candidates.iter().map(Vec::len).max().unwrap_or(1) })
}

/// One value per unlabeled point.
#[derive(Clone, Debug, PartialEq)]
pub struct AggregatedValues {
    pub ids: Vec<u64>,
    pub values: Vec<f64>,
    pub aggregation: Aggregation,
}

impl AggregatedValues {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    /// The shared CSV representation, tagged `regressed`.
    pub fn to_valuation_result(&self) -> ValuationResult {
        ValuationResult {
            ids: self.ids.clone(),
            values: self.values.clone(),
            std_errors: None,
            method: ValuationMethod::Regressed,
            utility_total: None,
            utility_empty: None,
            metadata: ValuationMetadata {
                aggregation: Some(self.aggregation.as_str().to_string()),
                ..Default::default()
            },
        }
    }

    /// Reads values back from a CSV table; the aggregation rule defaults to
    /// max when the header does not name one.
    pub fn from_valuation_result(result: &ValuationResult) -> Result<Self> {
        let aggregation = match &result.metadata.aggregation {
            Some(a) => a.parse()?,
            None => Aggregation::Max,
        };
        Ok(Self { ids: result.ids.clone(), values: result.values.clone(), aggregation })
    }
}

fn aggregate_point(values: &[ClassValue], mode: Aggregation) -> f64 {
    match mode {
        Aggregation::Max => values.iter().map(|v| v.value).fold(f64::NEG_INFINITY, f64::max),
        Aggregation::Mean => values.iter().map(|v| v.value).sum::<f64>() / values.len() as f64,
        Aggregation::ConfidenceWeighted => {
            let total: f64 = values.iter().map(|v| v.confidence).sum();
            if total > 0.0 {
                values.iter().map(|v| v.confidence * v.value).sum::<f64>() / total
            } else {
                aggregate_point(values, Aggregation::Mean)
            }
        }
    }
}

pub fn aggregate(values: &ClassConditionalValues, mode: Aggregation) -> Result<AggregatedValues> {
    if let Some(p) = values.points.iter().find(|p| p.values.is_empty()) {
        return Err(Error::Precondition(format!("point {} has no class-conditional values", p.id)));
    }
    Ok(AggregatedValues {
        ids: values.points.iter().map(|p| p.id).collect(),
        values: values.points.iter().map(|p| aggregate_point(&p.values, mode)).collect(),
        aggregation: mode,
    })
}

/// (rank distance, point id, position)
type Key = (f64, u64, usize);

/// The `k` smallest keys in ascending (distance, id) order.
fn nearest(mut keys: Vec<Key>, k: usize) -> Vec<Key> {
    let cmp = |a: &Key, b: &Key| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
    if k < keys.len() {
        keys.select_nth_unstable_by(k, cmp);
        keys.truncate(k);
    }
    keys.sort_unstable_by(cmp);
    keys
}

/// The whole extrapolation pipeline with a single distance pass per pool
/// point: candidate votes and every per-class regressor read off the same
/// sorted neighbour list. Produces the same numbers as chaining
/// [`fit_value_regressors`], [`candidate_classes`], [`predict_values`] and
/// [`aggregate`].
pub fn extrapolate_values(
    pool: &PointSet,
    labeled: &LabeledSet,
    values: &ValuationResult,
    vote_k: usize,
    reg: &RegressionConfig,
) -> Result<AggregatedValues> {
    reg.validate()?;
    ensure!(vote_k >= 1, Validation, "vote K must be at least 1");
    ensure!(!labeled.is_empty(), Precondition, "cannot extrapolate without labeled points");
    let by_pos = values_by_position(labeled, values)?;
    let classes = labeled.num_classes as usize;
    let mut class_size = vec![0usize; classes];
    for &l in &labeled.labels {
        class_size[l as usize] += 1;
    }
    let voters = vote_k.min(labeled.len());
    let global_k = reg.k_neighbors.min(labeled.len());

    let mut class_members: Vec<Vec<usize>> = vec![Vec::new(); classes];
    for (p, &l) in labeled.labels.iter().enumerate() {
        class_members[l as usize].push(p);
    }

    let out: Vec<f64> = (0..pool.len())
        .into_par_iter()
        .map(|i| {
            let query = pool.row(i);
            let keys: Vec<Key> = (0..labeled.len())
                .map(|p| (reg.metric.rank_distance(query, labeled.row(p)), labeled.id(p), p))
                .collect();
            let mut counts = vec![0usize; classes];
            for &(_, _, p) in &nearest(keys.clone(), voters) {
                counts[labeled.labels[p] as usize] += 1;
            }
            let candidates = rank_votes(&counts, voters, reg.candidate_limit);
            let mut per_class: Vec<ClassValue> = Vec::with_capacity(candidates.len());
            for c in &candidates {
                let members = &class_members[c.class as usize];
                if members.is_empty() {
                    continue;
                }
                let take = reg.k_neighbors.min(members.len());
                let sum: f64 =
                    nearest(members.iter().map(|&p| keys[p]).collect(), take).iter().map(|&(_, _, p)| by_pos[p]).sum();
                per_class.push(ClassValue { class: c.class, value: sum / take as f64, confidence: c.fraction });
            }
            if per_class.is_empty() {
                let sum: f64 = nearest(keys, global_k).iter().map(|&(_, _, p)| by_pos[p]).sum();
                per_class.push(ClassValue {
                    class: candidates[0].class,
                    value: sum / global_k as f64,
                    confidence: candidates[0].fraction,
                });
            }
            aggregate_point(&per_class, reg.aggregation)
        })
        .collect();
    Ok(AggregatedValues { ids: pool.ids.clone(), values: out, aggregation: reg.aggregation })
}
