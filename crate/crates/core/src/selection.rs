//! Batch selection: diversity and uncertainty selectors, and the value-based
//! pre-selection filter that shrinks the pool before a selector runs.

use std::collections::{HashMap, HashSet};
use std::time::{Duration, Instant};

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize, Serializer};

use crate::error::{ensure, Error, Result};
use crate::extrapolation::AggregatedValues;
use crate::points::{neighbor_order, squared_euclidean, LabeledSet, Metric, PointSet};

/// Wall-clock time spent in each stage of one selection round.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct StageTimings {
    #[serde(rename = "valuation_us", serialize_with = "micros")]
    pub valuation: Duration,
    #[serde(rename = "regression_us", serialize_with = "micros")]
    pub regression: Duration,
    #[serde(rename = "preselect_us", serialize_with = "micros")]
    pub preselect: Duration,
    #[serde(rename = "diversify_us", serialize_with = "micros")]
    pub diversify: Duration,
}

fn micros<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_u64(d.as_micros() as u64)
}

impl StageTimings {
    pub fn total(&self) -> Duration {
        self.valuation + self.regression + self.preselect + self.diversify
    }
}

/// Ids chosen for labeling in one round, in pick order.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SelectionBatch {
    pub chosen: Vec<u64>,
    pub method_tag: String,
    pub stage_timings: StageTimings,
}

impl SelectionBatch {
    fn timed(tag: &str, started: Instant, chosen: Vec<u64>) -> Self {
        Self {
            chosen,
            method_tag: tag.to_string(),
            stage_timings: StageTimings { diversify: started.elapsed(), ..Default::default() },
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("batch serialises")
    }
}

/// How many top-valued points survive pre-selection.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PreselectSpec {
    /// Share of the pool kept, in `(0, 1]`.
    pub fraction: f64,
    /// Minimum number kept; `None` means twice the batch size.
    #[serde(default)]
    pub floor: Option<usize>,
}

impl PreselectSpec {
    pub fn new(fraction: f64) -> Self {
        Self { fraction, floor: None }
    }

    pub fn validate(&self) -> Result<()> {
        ensure!(
            self.fraction > 0.0 && self.fraction <= 1.0,
            Validation,
            "pre-selection fraction must lie in (0, 1], got {}",
            self.fraction
        );
        Ok(())
    }

    /// `max(floor, ceil(fraction · pool))`, capped at the pool and never
    /// below `min(batch, pool)`.
    pub fn count(&self, pool: usize, batch: usize) -> usize {
        let floor = self.floor.unwrap_or(2 * batch);
        let by_fraction = (self.fraction * pool as f64).ceil() as usize;
        floor.max(by_fraction).min(pool).max(batch.min(pool))
    }
}

/// Ids of the highest-valued points, best first, ties by ascending id.
pub fn preselect(values: &AggregatedValues, spec: &PreselectSpec, batch: usize) -> Result<Vec<u64>> {
    spec.validate()?;
    let count = spec.count(values.len(), batch);
    let mut order: Vec<usize> = (0..values.len()).collect();
    let cmp = |a: &usize, b: &usize| {
        values.values[*b].total_cmp(&values.values[*a]).then(values.ids[*a].cmp(&values.ids[*b]))
    };
    if count < order.len() {
        order.select_nth_unstable_by(count, cmp);
        order.truncate(count);
    }
    order.sort_unstable_by(cmp);
    Ok(order.into_iter().map(|i| values.ids[i]).collect())
}

/// Greedy k-center: repeatedly takes the pool point farthest from every
/// labeled point and every earlier pick. Output is in pick order.
pub fn coreset_greedy(pool: &PointSet, labeled: &PointSet, batch: usize) -> Result<SelectionBatch> {
    ensure!(!pool.is_empty(), Precondition, "coreset selection needs a nonempty pool");
    ensure!(labeled.is_empty() || labeled.dims() == pool.dims(), Validation, "labeled and pool dimensions differ");
    let started = Instant::now();
    // Squared distances: same argmax, no square roots.
    let mut cover: Vec<f64> = (0..pool.len())
        .into_par_iter()
        .map(|i| {
            let x = pool.row(i);
            labeled.features.iter_rows().map(|c| squared_euclidean(x, c)).fold(f64::INFINITY, f64::min)
        })
        .collect();

    let take = batch.min(pool.len());
    let mut chosen = Vec::with_capacity(take);
    let ids = &pool.ids;
    let better = |a: (f64, u64, usize), b: (f64, u64, usize)| {
        if a.0 > b.0 || (a.0 == b.0 && a.1 < b.1) {
            a
        } else {
            b
        }
    };
    let none = (f64::NEG_INFINITY, u64::MAX, usize::MAX);
    let mut best = cover.par_iter().enumerate().map(|(i, &c)| (c, ids[i], i)).reduce(|| none, better);
    while chosen.len() < take {
        let pick = best.2;
        chosen.push(ids[pick]);
        cover[pick] = f64::NEG_INFINITY;
        let center = pool.row(pick);
        best = cover
            .par_iter_mut()
            .enumerate()
            .map(|(i, c)| {
                if *c > f64::NEG_INFINITY {
                    let d = squared_euclidean(pool.row(i), center);
                    if d < *c {
                        *c = d;
                    }
                }
                (*c, ids[i], i)
            })
            .reduce(|| none, better);
    }
    Ok(SelectionBatch::timed("coreset", started, chosen))
}

/// Largest distance from any point to its nearest center.
pub fn cover_radius(points: &PointSet, centers: &PointSet) -> f64 {
    points
        .features
        .iter_rows()
        .map(|x| centers.features.iter_rows().map(|c| squared_euclidean(x, c)).fold(f64::INFINITY, f64::min))
        .fold(0.0, f64::max)
        .sqrt()
}

/// Seeded k-means++ style seeding: the first index uniformly from
/// `first_candidates`, later ones with probability proportional to the
/// squared distance to the nearest earlier pick. Falls back to a uniform draw
/// over unpicked indices when every remaining weight is zero.
fn d2_sample<D>(n: usize, count: usize, first_candidates: &[usize], rng: &mut ChaCha8Rng, dist2: D) -> Vec<usize>
where
    D: Fn(usize, usize) -> f64 + Sync,
{
    let mut picked = Vec::with_capacity(count);
    if count == 0 || n == 0 {
        return picked;
    }
    let first = first_candidates[rng.random_range(0..first_candidates.len())];
    picked.push(first);
    let mut taken = vec![false; n];
    taken[first] = true;
    let mut nearest: Vec<f64> = (0..n).into_par_iter().map(|i| dist2(i, first)).collect();
    while picked.len() < count.min(n) {
        for (i, w) in nearest.iter_mut().enumerate() {
            if taken[i] {
                *w = 0.0;
            }
        }
        let total: f64 = nearest.iter().sum();
        let next = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut chosen = None;
            for (i, &w) in nearest.iter().enumerate() {
                if w > 0.0 {
                    chosen = Some(i);
                    if target < w {
                        break;
                    }
                    target -= w;
                }
            }
            chosen.expect("positive total implies a positive weight")
        } else {
            let free: Vec<usize> = (0..n).filter(|&i| !taken[i]).collect();
            free[rng.random_range(0..free.len())]
        };
        picked.push(next);
        taken[next] = true;
        nearest.par_iter_mut().enumerate().for_each(|(i, w)| *w = w.min(dist2(i, next)));
    }
    picked
}

/// k-medoids Lloyd iterations seeded with D² sampling; returns the medoids.
pub fn k_medians(pool: &PointSet, batch: usize, iters: usize, seed: u64) -> Result<SelectionBatch> {
    let started = Instant::now();
    let n = pool.len();
    let k = batch.min(n);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let all: Vec<usize> = (0..n).collect();
    let mut medoids = d2_sample(n, k, &all, &mut rng, |i, j| squared_euclidean(pool.row(i), pool.row(j)));
    if k == 0 {
        return Ok(SelectionBatch::timed("k-medians", started, Vec::new()));
    }

    for _ in 0..iters {
        let assign: Vec<usize> = (0..n)
            .into_par_iter()
            .map(|i| {
                let x = pool.row(i);
                let mut best = (f64::INFINITY, 0);
                for (c, &m) in medoids.iter().enumerate() {
                    let d = squared_euclidean(x, pool.row(m));
                    if d < best.0 {
                        best = (d, c);
                    }
                }
                best.1
            })
            .collect();
        let mut clusters: Vec<Vec<usize>> = vec![Vec::new(); k];
        for (i, &c) in assign.iter().enumerate() {
            clusters[c].push(i);
        }
        let updated: Vec<usize> = clusters
            .par_iter()
            .zip(medoids.par_iter())
            .map(|(members, &current)| {
                if members.is_empty() {
                    return current;
                }
                let mut best = (f64::INFINITY, u64::MAX, current);
                for &cand in members {
                    let cost: f64 =
                        members.iter().map(|&o| squared_euclidean(pool.row(cand), pool.row(o)).sqrt()).sum();
                    let key = (cost, pool.ids[cand]);
                    if key.0 < best.0 || (key.0 == best.0 && key.1 < best.1) {
                        best = (key.0, key.1, cand);
                    }
                }
                best.2
            })
            .collect();
        if updated == medoids {
            break;
        }
        medoids = updated;
    }
    Ok(SelectionBatch::timed("k-medians", started, medoids.into_iter().map(|m| pool.ids[m]).collect()))
}

/// Training settings of the linear softmax probe behind BADGE.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProbeConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        Self { epochs: 100, learning_rate: 0.1, seed: 0 }
    }
}

/// Multinomial logistic regression with a bias column.
struct SoftmaxProbe {
    classes: usize,
    dims: usize,
    /// `classes × (dims + 1)`, bias last.
    weights: Vec<f64>,
}

impl SoftmaxProbe {
    fn probabilities(&self, x: &[f32], out: &mut [f64]) {
        let stride = self.dims + 1;
        for (c, o) in out.iter_mut().enumerate() {
            let w = &self.weights[c * stride..(c + 1) * stride];
            *o = w[self.dims] + x.iter().zip(w).map(|(a, b)| *a as f64 * b).sum::<f64>();
        }
        let max = out.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut total = 0.0;
        for o in out.iter_mut() {
            *o = (*o - max).exp();
            total += *o;
        }
        for o in out.iter_mut() {
            *o /= total;
        }
    }

    fn train(labeled: &LabeledSet, cfg: &ProbeConfig) -> Result<Self> {
        let classes = labeled.num_classes as usize;
        let dims = labeled.points.dims();
        let stride = dims + 1;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let mut probe = Self {
            classes,
            dims,
            weights: (0..classes * stride).map(|_| 0.01 * rng.sample::<f64, _>(StandardNormal)).collect(),
        };
        let n = labeled.len() as f64;
        let mut p = vec![0.0; classes];
        for epoch in 0..cfg.epochs {
            let mut grad = vec![0.0; classes * stride];
            let mut loss = 0.0;
            for i in 0..labeled.len() {
                let x = labeled.row(i);
                probe.probabilities(x, &mut p);
                let y = labeled.labels[i] as usize;
                loss -= p[y].max(f64::MIN_POSITIVE).ln();
                for c in 0..classes {
                    let r = p[c] - if c == y { 1.0 } else { 0.0 };
                    let g = &mut grad[c * stride..(c + 1) * stride];
                    for (gj, xj) in g.iter_mut().zip(x) {
                        *gj += r * *xj as f64;
                    }
                    g[dims] += r;
                }
            }
            loss /= n;
            if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                return Err(Error::Numeric(format!(
                    "probe diverged at epoch {epoch}: loss {loss}, learning rate {}",
                    cfg.learning_rate
                )));
            }
            for (w, g) in probe.weights.iter_mut().zip(&grad) {
                *w -= cfg.learning_rate * g / n;
            }
        }
        if probe.weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::Numeric("probe weights are not finite after training".into()));
        }
        Ok(probe)
    }
}

/// BADGE: D² sampling over hypothetical-label gradient embeddings of a
/// linear softmax probe trained on the labeled points.
///
/// The embedding of `x` is `(p(x) - onehot(argmax p(x))) ⊗ x`. It is never
/// materialised: squared distances between two outer products are computed
/// from the factor inner products.
pub fn badge_select(
    pool: &PointSet,
    labeled: &LabeledSet,
    batch: usize,
    probe: &ProbeConfig,
) -> Result<SelectionBatch> {
    ensure!(!labeled.is_empty(), Precondition, "BADGE needs labeled points to train its probe");
    ensure!(labeled.points.dims() == pool.dims(), Validation, "labeled and pool dimensions differ");
    let started = Instant::now();
    let model = SoftmaxProbe::train(labeled, probe)?;
    let residuals: Vec<Vec<f64>> = (0..pool.len())
        .into_par_iter()
        .map(|i| {
            let mut p = vec![0.0; model.classes];
            model.probabilities(pool.row(i), &mut p);
            let top = p
                .iter()
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |acc, (c, &v)| if v > acc.1 { (c, v) } else { acc })
                .0;
            p[top] -= 1.0;
            p
        })
        .collect();
    let res_sq: Vec<f64> = residuals.iter().map(|r| dot(r, r)).collect();
    let x_sq: Vec<f64> = (0..pool.len()).map(|i| dot_f32(pool.row(i), pool.row(i))).collect();
    let dist2 = |i: usize, j: usize| {
        let cross = dot(&residuals[i], &residuals[j]) * dot_f32(pool.row(i), pool.row(j));
        (res_sq[i] * x_sq[i] + res_sq[j] * x_sq[j] - 2.0 * cross).max(0.0)
    };
    let nonzero: Vec<usize> = (0..pool.len()).filter(|&i| res_sq[i] * x_sq[i] > 0.0).collect();
    let all: Vec<usize>;
    let first = if nonzero.is_empty() {
        all = (0..pool.len()).collect();
        &all
    } else {
        &nonzero
    };
    let mut rng = ChaCha8Rng::seed_from_u64(probe.seed ^ 0x9e37_79b9_7f4a_7c15);
    let picks = d2_sample(pool.len(), batch.min(pool.len()), first, &mut rng, dist2);
    Ok(SelectionBatch::timed("badge", started, picks.into_iter().map(|i| pool.ids[i]).collect()))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn dot_f32(a: &[f32], b: &[f32]) -> f64 {
    a.iter().zip(b).map(|(x, y)| *x as f64 * *y as f64).sum()
}

/// Laplace smoothing added to every vote fraction before taking logs.
pub const ENTROPY_SMOOTHING: f64 = 1e-6;

/// Entropy of the smoothed vote distribution among the `k` nearest labeled
/// points.
pub fn vote_entropy(query: &[f32], labeled: &LabeledSet, k: usize) -> f64 {
    let order = neighbor_order(query, &labeled.points, Metric::Euclidean);
    let voters = k.min(labeled.len()).max(1);
    let classes = labeled.num_classes as usize;
    let mut counts = vec![0usize; classes];
    for &(_, p) in &order[..voters] {
        counts[labeled.labels[p] as usize] += 1;
    }
    let norm = 1.0 + classes as f64 * ENTROPY_SMOOTHING;
    counts
        .iter()
        .map(|&c| {
            let p = (c as f64 / voters as f64 + ENTROPY_SMOOTHING) / norm;
            -p * p.ln()
        })
        .sum()
}

/// The `batch` pool points with the most uncertain KNN vote.
pub fn entropy_select(pool: &PointSet, labeled: &LabeledSet, batch: usize, k: usize) -> Result<SelectionBatch> {
    ensure!(!labeled.is_empty(), Precondition, "entropy selection needs labeled points");
    ensure!(k >= 1, Validation, "K must be at least 1");
    let started = Instant::now();
    let scores: Vec<f64> = (0..pool.len()).into_par_iter().map(|i| vote_entropy(pool.row(i), labeled, k)).collect();
    let mut order: Vec<usize> = (0..pool.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(pool.ids[a].cmp(&pool.ids[b])));
    order.truncate(batch);
    Ok(SelectionBatch::timed("entropy", started, order.into_iter().map(|i| pool.ids[i]).collect()))
}

/// Uniform sample without replacement.
pub fn random_select(pool: &[u64], batch: usize, seed: u64) -> SelectionBatch {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let picks = index::sample(&mut rng, pool.len(), batch.min(pool.len()));
    SelectionBatch::timed("random", started, picks.into_iter().map(|i| pool[i]).collect())
}

/// A selection algorithm together with its own settings.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Selector {
    Coreset,
    KMedians {
        #[serde(default = "default_kmedians_iters")]
        iters: usize,
        #[serde(default)]
        seed: u64,
    },
    Badge {
        #[serde(default, flatten)]
        probe: ProbeConfig,
    },
    Entropy {
        #[serde(default = "default_entropy_k")]
        k: usize,
    },
    Random {
        #[serde(default)]
        seed: u64,
    },
}

fn default_kmedians_iters() -> usize {
    10
}

fn default_entropy_k() -> usize {
    5
}

impl Selector {
    pub fn tag(&self) -> &'static str {
        match self {
            Selector::Coreset => "coreset",
            Selector::KMedians { .. } => "k-medians",
            Selector::Badge { .. } => "badge",
            Selector::Entropy { .. } => "entropy",
            Selector::Random { .. } => "random",
        }
    }

    /// The same selector with its seed replaced, for independent repeats.
    pub fn reseeded(&self, seed: u64) -> Self {
        match *self {
            Selector::KMedians { iters, .. } => Selector::KMedians { iters, seed },
            Selector::Badge { probe } => Selector::Badge { probe: ProbeConfig { seed, ..probe } },
            Selector::Random { .. } => Selector::Random { seed },
            other => other,
        }
    }

    pub fn select(&self, pool: &PointSet, labeled: &LabeledSet, batch: usize) -> Result<SelectionBatch> {
        match self {
            Selector::Coreset => coreset_greedy(pool, &labeled.points, batch),
            Selector::KMedians { iters, seed } => k_medians(pool, batch, *iters, *seed),
            Selector::Badge { probe } => badge_select(pool, labeled, batch, probe),
            Selector::Entropy { k } => entropy_select(pool, labeled, batch, *k),
            Selector::Random { seed } => Ok(random_select(&pool.ids, batch, *seed)),
        }
    }
}

/// Pre-selects the top-valued share of the pool, then runs `selector` on
/// the survivors. The filtered pool keeps the original pool order.
pub fn ads_enhanced(
    selector: &Selector,
    values: &AggregatedValues,
    spec: &PreselectSpec,
    pool: &PointSet,
    labeled: &LabeledSet,
    batch: usize,
) -> Result<SelectionBatch> {
    spec.validate()?;
    let started = Instant::now();
    let pool_ids: HashSet<u64> = pool.ids.iter().copied().collect();
    let restricted: AggregatedValues = {
        let by_id: HashMap<u64, f64> = values.ids.iter().copied().zip(values.values.iter().copied()).collect();
        let mut vals = Vec::with_capacity(pool.len());
        for id in &pool.ids {
            let v = by_id.get(id).ok_or_else(|| Error::Validation(format!("no value for pool point {id}")))?;
            vals.push(*v);
        }
        debug_assert_eq!(pool_ids.len(), pool.len());
        AggregatedValues { ids: pool.ids.clone(), values: vals, aggregation: values.aggregation }
    };
    let keep: HashSet<u64> = preselect(&restricted, spec, batch)?.into_iter().collect();
    let positions: Vec<usize> = (0..pool.len()).filter(|&i| keep.contains(&pool.ids[i])).collect();
    let filtered = pool.subset(&positions);
    let preselect_time = started.elapsed();

    let mut out = selector.select(&filtered, labeled, batch)?;
    out.method_tag = format!("ads+{}", selector.tag());
    out.stage_timings.preselect = preselect_time;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::points::FeatureMatrix;

    fn points(rows: &[[f32; 2]]) -> PointSet {
        PointSet::new((0..rows.len() as u64).collect(), FeatureMatrix::from_rows(rows).unwrap()).unwrap()
    }

    fn values(v: &[f64]) -> AggregatedValues {
        AggregatedValues { ids: (0..v.len() as u64).collect(), values: v.to_vec(), aggregation: Default::default() }
    }

    #[test]
    fn preselect_counts() {
        let vals = values(&[0.0, 0.9, 0.1, 0.8, 0.2, 0.7, 0.3, 0.6, 0.4, 0.5]);
        let top3 = preselect(&vals, &PreselectSpec { fraction: 0.3, floor: Some(0) }, 2).unwrap();
        assert_eq!(top3, vec![1, 3, 5]);
        let top5 = preselect(&vals, &PreselectSpec { fraction: 0.1, floor: Some(5) }, 2).unwrap();
        assert_eq!(top5, vec![1, 3, 5, 7, 9]);
        let ties = preselect(&values(&[1.0; 10]), &PreselectSpec { fraction: 0.3, floor: Some(0) }, 2).unwrap();
        assert_eq!(ties, vec![0, 1, 2]);
    }

    #[test]
    fn preselect_never_below_batch() {
        let spec = PreselectSpec { fraction: 0.1, floor: Some(0) };
        assert_eq!(spec.count(10, 4), 4);
        assert_eq!(spec.count(3, 4), 3);
        assert_eq!(PreselectSpec::new(0.1).count(100, 4), 10);
        assert_eq!(PreselectSpec::new(0.01).count(1000, 4), 10);
    }

    #[test]
    fn preselect_rejects_fraction_out_of_range() {
        for f in [0.0, 1.5, -0.2] {
            assert!(matches!(preselect(&values(&[1.0]), &PreselectSpec::new(f), 1), Err(Error::Validation(_))));
        }
    }

    #[test]
    fn coreset_hand_trace() {
        let pool = points(&[[1.0, 0.0], [3.0, 0.0], [3.1, 0.0]]);
        let labeled = points(&[[0.0, 0.0]]);
        let batch = coreset_greedy(&pool, &labeled, 2).unwrap();
        assert_eq!(batch.chosen, vec![2, 0]);
    }

    #[test]
    fn coreset_without_labels_starts_at_lowest_id() {
        let pool = points(&[[1.0, 0.0], [3.0, 0.0]]);
        let empty = PointSet::new(vec![], FeatureMatrix::empty(2)).unwrap();
        assert_eq!(coreset_greedy(&pool, &empty, 1).unwrap().chosen, vec![0]);
    }

    #[test]
    fn coreset_exhausts_pool_with_duplicates() {
        let pool = points(&[[1.0, 1.0], [1.0, 1.0], [2.0, 2.0]]);
        let empty = PointSet::new(vec![], FeatureMatrix::empty(2)).unwrap();
        let mut chosen = coreset_greedy(&pool, &empty, 5).unwrap().chosen;
        chosen.sort();
        assert_eq!(chosen, vec![0, 1, 2]);
    }

    #[test]
    fn k_medians_every_point_is_a_medoid() {
        let pool = points(&[[0.0, 0.0], [1.0, 0.0], [5.0, 5.0]]);
        let mut m = k_medians(&pool, 3, 5, 1).unwrap().chosen;
        m.sort();
        assert_eq!(m, vec![0, 1, 2]);
    }

    #[test]
    fn random_select_edges() {
        let pool: Vec<u64> = (10..20).collect();
        assert!(random_select(&pool, 0, 1).chosen.is_empty());
        let mut all = random_select(&pool, 10, 1).chosen;
        all.sort();
        assert_eq!(all, pool);
        assert_eq!(random_select(&pool, 4, 9).chosen, random_select(&pool, 4, 9).chosen);
    }

    #[test]
    fn entropy_values() {
        let labeled = LabeledSet::from_rows(&[[0.0f32, 0.0], [0.0, 1.0]], &[0, 1], 2).unwrap();
        let h = vote_entropy(&[0.0, 0.5], &labeled, 2);
        assert!((h - std::f64::consts::LN_2).abs() < 1e-5);
        let pure = LabeledSet::from_rows(&[[0.0f32, 0.0], [0.0, 1.0]], &[1, 1], 2).unwrap();
        assert!(vote_entropy(&[0.0, 0.5], &pure, 2) < 1e-4);
    }

    #[test]
    fn selector_config_parses() {
        let s: Selector = serde_json::from_str(r#"{"kind":"k-medians","iters":3}"#).unwrap();
        assert_eq!(s, Selector::KMedians { iters: 3, seed: 0 });
        let s: Selector = serde_json::from_str(r#"{"kind":"badge","epochs":5}"#).unwrap();
        assert_eq!(s.tag(), "badge");
        assert!(serde_json::from_str::<Selector>(r#"{"kind":"entropy","x":1}"#).is_err());
    }

    #[test]
    fn ads_requires_values_for_the_pool() {
        let pool = points(&[[0.0, 0.0], [1.0, 0.0]]);
        let labeled = LabeledSet::from_rows(&[[0.0f32, 0.0]], &[0], 2).unwrap();
        let short = values(&[0.5]);
        assert!(matches!(
            ads_enhanced(&Selector::Coreset, &short, &PreselectSpec::new(1.0), &pool, &labeled, 1),
            Err(Error::Validation(_))
        ));
    }
}
