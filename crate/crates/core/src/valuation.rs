//! Data Shapley values of labeled points under a K-nearest-neighbour
//! soft-vote utility.
//!
//! Three routes are provided:
//!
//! * [`knn_shapley_exact`]: the closed-form backward recurrence over
//!   distance-sorted points. `O(M · n · (d + log n))` for `n` labeled and `M`
//!   validation points. This is the production path.
//! * [`tmc_shapley`]: truncated Monte-Carlo permutation sampling, usable with
//!   any utility and kept as a reference estimator.
//! * [`brute_force_shapley`]: enumeration of every subset. Exponential, guarded
//!   to `n ≤ 20`, and used as ground truth in tests.
//!
//! The utility of a subset `S` is the mean over validation points of
//! `(1/K) · #{matching labels among the min(K, |S|) nearest members of S}`,
//! with distance ties broken by ascending point id and `v(∅)` taken from
//! [`UtilitySpec::empty_set_value`].

use std::io::{BufRead, BufReader, Read};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};
use crate::fsio;
use crate::points::{neighbor_order, LabeledSet, Metric};
use crate::reduce::{tree_fold, tree_mean};

/// Largest labeled set [`brute_force_shapley`] accepts.
pub const BRUTE_FORCE_MAX_POINTS: usize = 20;
/// Largest labeled set [`tmc_shapley_exhaustive`] accepts (`8! = 40320`).
pub const EXHAUSTIVE_PERMUTATION_MAX_POINTS: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UtilitySpec {
    pub k: usize,
    #[serde(default)]
    pub metric: Metric,
    #[serde(default)]
    pub empty_set_value: f64,
}

impl Default for UtilitySpec {
    fn default() -> Self {
        Self { k: 5, metric: Metric::Euclidean, empty_set_value: 0.0 }
    }
}

impl UtilitySpec {
    pub fn new(k: usize) -> Self {
        Self { k, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        ensure!(self.k >= 1, Validation, "K must be at least 1");
        ensure!(self.empty_set_value.is_finite(), Validation, "empty_set_value must be finite");
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ValuationMethod {
    KnnExact,
    Tmc,
    BruteForce,
    Regressed,
}

impl ValuationMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            ValuationMethod::KnnExact => "knn-exact",
            ValuationMethod::Tmc => "tmc",
            ValuationMethod::BruteForce => "brute-force",
            ValuationMethod::Regressed => "regressed",
        }
    }
}

impl std::str::FromStr for ValuationMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "knn-exact" => ValuationMethod::KnnExact,
            "tmc" => ValuationMethod::Tmc,
            "brute-force" => ValuationMethod::BruteForce,
            "regressed" => ValuationMethod::Regressed,
            other => return Err(Error::Validation(format!("unknown valuation method `{other}`"))),
        })
    }
}

/// Settings a result was produced with; serialised as the CSV header.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ValuationMetadata {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metric: Option<Metric>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub validation_size: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub num_permutations: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truncation_tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Aggregation rule, for extrapolated values.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub aggregation: Option<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ValuationResult {
    pub ids: Vec<u64>,
    pub values: Vec<f64>,
    /// Monte-Carlo standard error per point (TMC only).
    pub std_errors: Option<Vec<f64>>,
    pub method: ValuationMethod,
    /// `v(N)` for the full labeled set; absent for extrapolated values.
    pub utility_total: Option<f64>,
    /// `v(∅)`; absent for extrapolated values.
    pub utility_empty: Option<f64>,
    pub metadata: ValuationMetadata,
}

impl ValuationResult {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn value_of(&self, id: u64) -> Option<f64> {
        self.ids.iter().position(|&i| i == id).map(|p| self.values[p])
    }

    pub fn sum(&self) -> f64 {
        crate::reduce::tree_sum(&self.values)
    }
}

/// Sorted neighbour lists of every labeled point, one per validation point.
struct NeighborTable {
    /// `orders[j]` lists labeled positions nearest-first for validation `j`.
    orders: Vec<Vec<usize>>,
    /// `matches[j][p]` is whether labeled position `p` shares validation
    /// point `j`'s label.
    matches: Vec<Vec<bool>>,
}

impl NeighborTable {
    fn build(labeled: &LabeledSet, validation: &LabeledSet, metric: Metric) -> Self {
        let (orders, matches) = (0..validation.len())
            .into_par_iter()
            .map(|j| {
                let order =
                    neighbor_order(validation.row(j), &labeled.points, metric).into_iter().map(|(_, p)| p).collect();
                let y = validation.labels[j];
                let m = labeled.labels.iter().map(|&l| l == y).collect();
                (order, m)
            })
            .unzip();
        Self { orders, matches }
    }

    /// Soft-vote utility of validation point `j` restricted to `member`.
    fn point_utility(&self, j: usize, k: usize, member: impl Fn(usize) -> bool) -> f64 {
        let mut seen = 0;
        let mut hits = 0usize;
        for &p in &self.orders[j] {
            if member(p) {
                hits += usize::from(self.matches[j][p]);
                seen += 1;
                if seen == k {
                    break;
                }
            }
        }
        hits as f64 / k as f64
    }

    fn utility(&self, k: usize, member: impl Fn(usize) -> bool + Sync) -> f64 {
        let per_point: Vec<f64> = (0..self.orders.len()).map(|j| self.point_utility(j, k, &member)).collect();
        tree_mean(&per_point)
    }
}

fn check_inputs(labeled: &LabeledSet, validation: &LabeledSet, spec: &UtilitySpec) -> Result<()> {
    spec.validate()?;
    ensure!(!validation.is_empty(), Precondition, "validation set is empty");
    ensure!(
        labeled.is_empty() || labeled.points.dims() == validation.points.dims(),
        Validation,
        "labeled points have {} dims, validation points {}",
        labeled.points.dims(),
        validation.points.dims()
    );
    Ok(())
}

/// `v(subset)`: mean soft-vote correctness over the validation points.
pub fn knn_utility(subset: &LabeledSet, validation: &LabeledSet, spec: &UtilitySpec) -> Result<f64> {
    check_inputs(subset, validation, spec)?;
    if subset.is_empty() {
        return Ok(spec.empty_set_value);
    }
    let table = NeighborTable::build(subset, validation, spec.metric);
    Ok(table.utility(spec.k, |_| true))
}

/// Shapley values of a single validation point's utility, indexed by
/// labeled position, given the labeled positions sorted nearest-first and a
/// per-position label-match flag. Assumes `v(∅) = 0`.
pub fn knn_shapley_single(order: &[usize], matches: &[bool], k: usize) -> Vec<f64> {
    let n = order.len();
    let mut s = vec![0.0; n];
    if n == 0 {
        return s;
    }
    let hit = |p: usize| if matches[p] { 1.0 } else { 0.0 };
    let kf = k as f64;
    let last = order[n - 1];
    s[last] = hit(last) / n as f64;
    // `rank` is the 1-based position of order[rank - 1].
    for rank in (1..n).rev() {
        let here = order[rank - 1];
        let next = order[rank];
        s[here] = s[next] + (hit(here) - hit(next)) / kf * (k.min(rank) as f64) / rank as f64;
    }
    s
}

/// Exact Shapley values under the soft-vote KNN utility.
pub fn knn_shapley_exact(labeled: &LabeledSet, validation: &LabeledSet, spec: &UtilitySpec) -> Result<ValuationResult> {
    check_inputs(labeled, validation, spec)?;
    let n = labeled.len();
    ensure!(n > 0, Precondition, "labeled set is empty");
    ensure!(spec.k <= n, Precondition, "K = {} exceeds the {n} labeled points", spec.k);

    let m = validation.len();
    let metric = spec.metric;
    let k = spec.k;
    let per_val = |j: usize| -> (Vec<f64>, f64) {
        let order: Vec<usize> =
            neighbor_order(validation.row(j), &labeled.points, metric).into_iter().map(|(_, p)| p).collect();
        let y = validation.labels[j];
        let matches: Vec<bool> = labeled.labels.iter().map(|&l| l == y).collect();
        let hits = order[..k].iter().filter(|&&p| matches[p]).count();
        (knn_shapley_single(&order, &matches, k), hits as f64 / k as f64)
    };

    // Sum the per-validation vectors and utilities with one fixed tree.
    // Same tree shape as `tree_mean`, so `utility_total` is bit-identical to
    // `knn_utility` on the full set.
    let (sums, utility_sum) = tree_fold(0..m, &per_val, &|(mut a, ua): (Vec<f64>, f64), (b, ub)| {
        for (x, y) in a.iter_mut().zip(b) {
            *x += y;
        }
        (a, ua + ub)
    });
    let utility_total = utility_sum / m as f64;
    let shift = spec.empty_set_value / n as f64;
    let values = sums.into_iter().map(|s| s / m as f64 - shift).collect();

    Ok(ValuationResult {
        ids: labeled.ids().to_vec(),
        values,
        std_errors: None,
        method: ValuationMethod::KnnExact,
        utility_total: Some(utility_total),
        utility_empty: Some(spec.empty_set_value),
        metadata: ValuationMetadata {
            k: Some(k),
            metric: Some(metric),
            validation_size: Some(m),
            ..Default::default()
        },
    })
}

/// Ground-truth Shapley values by enumerating every subset of the labeled
/// set.
pub fn brute_force_shapley(
    labeled: &LabeledSet,
    validation: &LabeledSet,
    spec: &UtilitySpec,
) -> Result<ValuationResult> {
    check_inputs(labeled, validation, spec)?;
    let n = labeled.len();
    ensure!(n > 0, Precondition, "labeled set is empty");
    ensure!(
        n <= BRUTE_FORCE_MAX_POINTS,
        Capacity,
        "brute-force valuation is limited to {BRUTE_FORCE_MAX_POINTS} points, got {n}"
    );
    let table = NeighborTable::build(labeled, validation, spec.metric);
    let k = spec.k;
    let subsets = 1usize << n;
    let utility: Vec<f64> = (0..subsets)
        .into_par_iter()
        .map(|mask| if mask == 0 { spec.empty_set_value } else { table.utility(k, |p| mask >> p & 1 == 1) })
        .collect();

    // weight[s] = 1 / (n · C(n-1, s))
    let mut binom = vec![1.0f64; n];
    for s in 1..n {
        binom[s] = binom[s - 1] * (n - s) as f64 / s as f64;
    }
    let weight: Vec<f64> = binom.iter().map(|c| 1.0 / (n as f64 * c)).collect();

    let values = (0..n)
        .into_par_iter()
        .map(|z| {
            let bit = 1usize << z;
            let mut phi = 0.0;
            for mask in 0..subsets {
                if mask & bit == 0 {
                    let size = mask.count_ones() as usize;
                    phi += weight[size] * (utility[mask | bit] - utility[mask]);
                }
            }
            phi
        })
        .collect();

    Ok(ValuationResult {
        ids: labeled.ids().to_vec(),
        values,
        std_errors: None,
        method: ValuationMethod::BruteForce,
        utility_total: Some(utility[subsets - 1]),
        utility_empty: Some(spec.empty_set_value),
        metadata: ValuationMetadata {
            k: Some(k),
            metric: Some(spec.metric),
            validation_size: Some(validation.len()),
            ..Default::default()
        },
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TmcConfig {
    pub num_permutations: usize,
    /// Scanning of a permutation stops once
    /// `|v(prefix) - v(N)| < truncation_tol · |v(N)|`.
    pub truncation_tol: f64,
    pub seed: u64,
}

impl Default for TmcConfig {
    fn default() -> Self {
        Self { num_permutations: 1000, truncation_tol: 0.01, seed: 0 }
    }
}

/// Incrementally tracks `v(prefix)` while a permutation is scanned.
struct PrefixUtility<'a> {
    table: &'a NeighborTable,
    /// `rank[j][p]`: position of labeled point `p` in validation `j`'s order.
    rank: &'a [Vec<usize>],
    k: usize,
    /// Ranks of the (at most K) nearest prefix members, ascending, per
    /// validation point.
    nearest: Vec<Vec<usize>>,
    per_point: Vec<f64>,
}

impl<'a> PrefixUtility<'a> {
    fn new(table: &'a NeighborTable, rank: &'a [Vec<usize>], k: usize) -> Self {
        let m = table.orders.len();
        Self { table, rank, k, nearest: vec![Vec::with_capacity(k + 1); m], per_point: vec![0.0; m] }
    }

    fn insert(&mut self, p: usize) -> f64 {
        for j in 0..self.nearest.len() {
            let r = self.rank[j][p];
            let near = &mut self.nearest[j];
            if near.len() == self.k && r > near[self.k - 1] {
                continue;
            }
            let at = near.partition_point(|&x| x < r);
            near.insert(at, r);
            near.truncate(self.k);
            let order = &self.table.orders[j];
            let hits = near.iter().filter(|&&r| self.table.matches[j][order[r]]).count();
            self.per_point[j] = hits as f64 / self.k as f64;
        }
        tree_mean(&self.per_point)
    }
}

fn rank_table(table: &NeighborTable, n: usize) -> Vec<Vec<usize>> {
    table
        .orders
        .iter()
        .map(|order| {
            let mut rank = vec![0; n];
            for (r, &p) in order.iter().enumerate() {
                rank[p] = r;
            }
            rank
        })
        .collect()
}

/// Marginal contributions along one permutation, with truncation.
fn permutation_marginals(
    table: &NeighborTable,
    rank: &[Vec<usize>],
    spec: &UtilitySpec,
    perm: &[usize],
    total: f64,
    tol: f64,
) -> Vec<f64> {
    let mut marginals = vec![0.0; perm.len()];
    let mut prefix = PrefixUtility::new(table, rank, spec.k);
    let mut current = spec.empty_set_value;
    for &p in perm {
        if (current - total).abs() < tol * total.abs() {
            break;
        }
        let next = prefix.insert(p);
        marginals[p] = next - current;
        current = next;
    }
    marginals
}

struct MarginalMoments {
    sum: Vec<f64>,
    sum_sq: Vec<f64>,
}

fn finish_tmc(
    labeled: &LabeledSet,
    validation: &LabeledSet,
    spec: &UtilitySpec,
    moments: MarginalMoments,
    count: usize,
    total: f64,
    metadata: ValuationMetadata,
) -> ValuationResult {
    let c = count as f64;
    let values: Vec<f64> = moments.sum.iter().map(|s| s / c).collect();
    let std_errors = moments
        .sum_sq
        .iter()
        .zip(&values)
        .map(|(sq, mean)| {
            if count < 2 {
                0.0
            } else {
                let var = ((sq - c * mean * mean) / (c - 1.0)).max(0.0);
                (var / c).sqrt()
            }
        })
        .collect();
    ValuationResult {
        ids: labeled.ids().to_vec(),
        values,
        std_errors: Some(std_errors),
        method: ValuationMethod::Tmc,
        utility_total: Some(total),
        utility_empty: Some(spec.empty_set_value),
        metadata: ValuationMetadata {
            k: Some(spec.k),
            metric: Some(spec.metric),
            validation_size: Some(validation.len()),
            ..metadata
        },
    }
}

fn moments_over<F>(count: usize, n: usize, marginals: F) -> MarginalMoments
where
    F: Fn(usize) -> Vec<f64> + Sync,
{
    let (sum, sum_sq) = tree_fold(
        0..count,
        &|i| {
            let m = marginals(i);
            let sq = m.iter().map(|v| v * v).collect::<Vec<_>>();
            (m, sq)
        },
        &|(mut a, mut asq): (Vec<f64>, Vec<f64>), (b, bsq)| {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
            for (x, y) in asq.iter_mut().zip(bsq) {
                *x += y;
            }
            (a, asq)
        },
    );
    debug_assert_eq!(sum.len(), n);
    MarginalMoments { sum, sum_sq }
}

/// Truncated Monte-Carlo estimate over seeded random permutations. Each
/// permutation draws from its own ChaCha stream, so the result does not
/// depend on how permutations are scheduled across threads. The reported
/// standard error is 0 when only one permutation is drawn.
pub fn tmc_shapley(
    labeled: &LabeledSet,
    validation: &LabeledSet,
    spec: &UtilitySpec,
    mc: &TmcConfig,
) -> Result<ValuationResult> {
    check_inputs(labeled, validation, spec)?;
    ensure!(mc.num_permutations >= 1, Validation, "num_permutations must be at least 1");
    ensure!(
        mc.truncation_tol >= 0.0 && mc.truncation_tol.is_finite(),
        Validation,
        "truncation_tol must be a finite non-negative number"
    );
    let n = labeled.len();
    ensure!(n > 0, Precondition, "labeled set is empty");
    let table = NeighborTable::build(labeled, validation, spec.metric);
    let rank = rank_table(&table, n);
    let total = table.utility(spec.k, |_| true);

    let moments = moments_over(mc.num_permutations, n, |i| {
        let mut rng = ChaCha8Rng::seed_from_u64(mc.seed);
        rng.set_stream(i as u64);
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut rng);
        permutation_marginals(&table, &rank, spec, &perm, total, mc.truncation_tol)
    });
    Ok(finish_tmc(
        labeled,
        validation,
        spec,
        moments,
        mc.num_permutations,
        total,
        ValuationMetadata {
            num_permutations: Some(mc.num_permutations),
            truncation_tol: Some(mc.truncation_tol),
            seed: Some(mc.seed),
            ..Default::default()
        },
    ))
}

/// The permutation estimator evaluated over all `n!` orderings.
pub fn tmc_shapley_exhaustive(
    labeled: &LabeledSet,
    validation: &LabeledSet,
    spec: &UtilitySpec,
    truncation_tol: f64,
) -> Result<ValuationResult> {
    check_inputs(labeled, validation, spec)?;
    let n = labeled.len();
    ensure!(n > 0, Precondition, "labeled set is empty");
    ensure!(
        n <= EXHAUSTIVE_PERMUTATION_MAX_POINTS,
        Capacity,
        "exhaustive permutation enumeration is limited to {EXHAUSTIVE_PERMUTATION_MAX_POINTS} points, got {n}"
    );
    ensure!(truncation_tol >= 0.0, Validation, "truncation_tol must be non-negative");
    let table = NeighborTable::build(labeled, validation, spec.metric);
    let rank = rank_table(&table, n);
    let total = table.utility(spec.k, |_| true);
    let perms = all_permutations(n);
    let moments =
        moments_over(perms.len(), n, |i| permutation_marginals(&table, &rank, spec, &perms[i], total, truncation_tol));
    Ok(finish_tmc(
        labeled,
        validation,
        spec,
        moments,
        perms.len(),
        total,
        ValuationMetadata {
            num_permutations: Some(perms.len()),
            truncation_tol: Some(truncation_tol),
            ..Default::default()
        },
    ))
}

/// Lexicographic enumeration of the permutations of `0..n`.
fn all_permutations(n: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut perm: Vec<usize> = (0..n).collect();
    loop {
        out.push(perm.clone());
        let Some(i) = (1..n).rev().find(|&i| perm[i - 1] < perm[i]) else {
            return out;
        };
        let j = (i..n).rev().find(|&j| perm[j] > perm[i - 1]).unwrap();
        perm.swap(i - 1, j);
        perm[i..].reverse();
    }
}

#[derive(Serialize, Deserialize)]
struct CsvHeader {
    method: ValuationMethod,
    utility_total: Option<f64>,
    utility_empty: Option<f64>,
    #[serde(flatten)]
    metadata: ValuationMetadata,
}

impl ValuationResult {
    /// A `# {json}` metadata line followed by `point_id,value` rows
    /// (plus `std_error` when present).
    pub fn to_csv_string(&self) -> String {
        let header = CsvHeader {
            method: self.method,
            utility_total: self.utility_total,
            utility_empty: self.utility_empty,
            metadata: self.metadata.clone(),
        };
        let mut out = format!("# {}\n", serde_json::to_string(&header).expect("header serialises"));
        let mut w = csv::Writer::from_writer(Vec::new());
        match &self.std_errors {
            Some(se) => {
                w.write_record(["point_id", "value", "std_error"]).unwrap();
                for ((id, v), e) in self.ids.iter().zip(&self.values).zip(se) {
                    w.write_record([id.to_string(), v.to_string(), e.to_string()]).unwrap();
                }
            }
            None => {
                w.write_record(["point_id", "value"]).unwrap();
                for (id, v) in self.ids.iter().zip(&self.values) {
                    w.write_record([id.to_string(), v.to_string()]).unwrap();
                }
            }
        }
        out.push_str(&String::from_utf8(w.into_inner().expect("in-memory writer")).unwrap());
        out
    }

    pub fn from_csv_reader<R: Read>(reader: R) -> Result<Self> {
        let mut reader = BufReader::new(reader);
        let mut first = String::new();
        reader.read_line(&mut first).map_err(|e| Error::Format(format!("cannot read values header: {e}")))?;
        let json = first
            .trim_end()
            .strip_prefix("# ")
            .ok_or_else(|| Error::Format("values file must start with a `# {json}` header".into()))?;
        let header: CsvHeader =
            serde_json::from_str(json).map_err(|e| Error::Format(format!("bad values header: {e}")))?;
        let mut rdr = csv::Reader::from_reader(reader);
        let columns = rdr.headers().map_err(|e| Error::Format(format!("bad values columns: {e}")))?.clone();
        let has_se = match columns.iter().collect::<Vec<_>>().as_slice() {
            ["point_id", "value"] => false,
            ["point_id", "value", "std_error"] => true,
            other => return Err(Error::Format(format!("unexpected value columns {other:?}"))),
        };
        let (mut ids, mut values, mut ses) = (Vec::new(), Vec::new(), Vec::new());
        for row in rdr.records() {
            let row = row.map_err(|e| Error::Format(format!("bad values row: {e}")))?;
            let parse_err = |e: &dyn std::fmt::Display| Error::Format(format!("bad values row {row:?}: {e}"));
            ids.push(row[0].parse::<u64>().map_err(|e| parse_err(&e))?);
            let v = row[1].parse::<f64>().map_err(|e| parse_err(&e))?;
            ensure!(v.is_finite(), Validation, "non-finite value for point {}", ids.last().unwrap());
            values.push(v);
            if has_se {
                ses.push(row[2].parse::<f64>().map_err(|e| parse_err(&e))?);
            }
        }
        Ok(Self {
            ids,
            values,
            std_errors: has_se.then_some(ses),
            method: header.method,
            utility_total: header.utility_total,
            utility_empty: header.utility_empty,
            metadata: header.metadata,
        })
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        fsio::write_atomic(path, self.to_csv_string().as_bytes())
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::from_csv_reader(f)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(rows: &[[f32; 1]], labels: &[u32]) -> LabeledSet {
        LabeledSet::from_rows(rows, labels, 2).unwrap()
    }

    #[test]
    fn utility_single_match_and_mismatch() {
        let val = set(&[[0.0]], &[1]);
        let spec = UtilitySpec::new(1);
        assert_eq!(knn_utility(&set(&[[1.0]], &[1]), &val, &spec).unwrap(), 1.0);
        assert_eq!(knn_utility(&set(&[[1.0]], &[0]), &val, &spec).unwrap(), 0.0);
    }

    #[test]
    fn utility_hand_enumerated() {
        // Labeled at 0, 1, 3 with labels 1, 0, 1; K = 2.
        // Validation at 0.4 (label 1): nearest 0 (d .4, hit), 1 (d .6, miss) -> 1/2.
        // Validation at 2.6 (label 0): nearest 3 (d .4, miss), 1 (d 1.6, hit) -> 1/2.
        // Validation at 2.6 with label 1 would give 1/2 as well; use label 0.
        let labeled = set(&[[0.0], [1.0], [3.0]], &[1, 0, 1]);
        let val = set(&[[0.4], [2.6]], &[1, 0]);
        let v = knn_utility(&labeled, &val, &UtilitySpec::new(2)).unwrap();
        assert_eq!(v, 0.5);
        let val = set(&[[0.4], [2.6]], &[1, 1]);
        let v = knn_utility(&labeled, &val, &UtilitySpec::new(2)).unwrap();
        assert_eq!(v, 0.5 * (0.5 + 0.5));
        let val = set(&[[-1.0], [2.6]], &[1, 1]);
        // -1: nearest 0 (hit), 1 (miss) -> .5 ; 2.6: 3 (hit), 1 (miss) -> .5
        assert_eq!(knn_utility(&labeled, &val, &UtilitySpec::new(2)).unwrap(), 0.5);
        let val = set(&[[-1.0], [2.6]], &[1, 1]);
        // K = 3: both see all three points, two hits -> 2/3.
        assert!((knn_utility(&labeled, &val, &UtilitySpec::new(3)).unwrap() - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn empty_subset_uses_convention() {
        let empty = LabeledSet::new(
            crate::points::PointSet::new(vec![], crate::points::FeatureMatrix::empty(1)).unwrap(),
            vec![],
            2,
        )
        .unwrap();
        let spec = UtilitySpec { empty_set_value: 0.25, ..UtilitySpec::new(1) };
        assert_eq!(knn_utility(&empty, &set(&[[0.0]], &[0]), &spec).unwrap(), 0.25);
    }

    #[test]
    fn exact_two_points() {
        let labeled = set(&[[0.1], [5.0]], &[1, 0]);
        let val = set(&[[0.0]], &[1]);
        let r = knn_shapley_exact(&labeled, &val, &UtilitySpec::new(1)).unwrap();
        assert_eq!(r.values, vec![1.0, 0.0]);
    }

    #[test]
    fn exact_rejects_k_above_n() {
        let labeled = set(&[[0.1], [5.0]], &[1, 0]);
        let val = set(&[[0.0]], &[1]);
        assert!(matches!(knn_shapley_exact(&labeled, &val, &UtilitySpec::new(3)), Err(Error::Precondition(_))));
    }

    #[test]
    fn brute_force_single_point() {
        let labeled = set(&[[0.3]], &[1]);
        let val = set(&[[0.0], [1.0]], &[1, 0]);
        let spec = UtilitySpec { empty_set_value: 0.1, ..UtilitySpec::new(1) };
        let r = brute_force_shapley(&labeled, &val, &spec).unwrap();
        assert!((r.values[0] - (0.5 - 0.1)).abs() < 1e-15);
    }

    #[test]
    fn brute_force_guard() {
        let rows: Vec<[f32; 1]> = (0..21).map(|i| [i as f32]).collect();
        let labels = vec![0; 21];
        let labeled = set(&rows, &labels);
        let val = set(&[[0.0]], &[0]);
        assert!(matches!(brute_force_shapley(&labeled, &val, &UtilitySpec::new(1)), Err(Error::Capacity(_))));
    }

    #[test]
    fn tmc_single_permutation_gives_prefix_marginals() {
        // The mismatching point 1 is nearer to the validation point, so the
        // marginals depend on which point arrives first.
        let labeled = set(&[[0.0], [1.0]], &[1, 0]);
        let val = set(&[[0.9]], &[1]);
        let spec = UtilitySpec::new(1);
        for seed in 0..8 {
            let mc = TmcConfig { num_permutations: 1, truncation_tol: 0.0, seed };
            let r = tmc_shapley(&labeled, &val, &spec, &mc).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(0);
            let mut perm = [0usize, 1];
            perm.shuffle(&mut rng);
            let expected = if perm[0] == 0 { vec![1.0, -1.0] } else { vec![0.0, 0.0] };
            assert_eq!(r.values, expected);
            assert_eq!(r.std_errors.unwrap(), vec![0.0, 0.0]);
        }
    }

    #[test]
    fn tmc_rejects_bad_config() {
        let labeled = set(&[[0.0]], &[1]);
        let val = set(&[[0.2]], &[1]);
        let spec = UtilitySpec::new(1);
        let zero = TmcConfig { num_permutations: 0, ..TmcConfig::default() };
        assert!(matches!(tmc_shapley(&labeled, &val, &spec, &zero), Err(Error::Validation(_))));
        let neg = TmcConfig { truncation_tol: -1.0, ..TmcConfig::default() };
        assert!(tmc_shapley(&labeled, &val, &spec, &neg).is_err());
    }

    #[test]
    fn permutations_are_complete() {
        let p = all_permutations(4);
        assert_eq!(p.len(), 24);
        let mut sorted = p.clone();
        sorted.sort();
        sorted.dedup();
        assert_eq!(sorted.len(), 24);
    }

    #[test]
    fn csv_round_trip() {
        let labeled = set(&[[0.1], [5.0], [2.0]], &[1, 0, 1]);
        let val = set(&[[0.0], [3.0]], &[1, 0]);
        let r = knn_shapley_exact(&labeled, &val, &UtilitySpec::new(2)).unwrap();
        let back = ValuationResult::from_csv_reader(r.to_csv_string().as_bytes()).unwrap();
        assert_eq!(back, r);
    }

    #[test]
    fn csv_without_header_is_a_format_error() {
        let err = ValuationResult::from_csv_reader("point_id,value\n1,0.5\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Format(_)));
    }
}
