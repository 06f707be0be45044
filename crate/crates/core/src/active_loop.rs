//! Multi-round batch active learning on a fixed feature space.
//!
//! Each round values the current labeled set, extrapolates values to the
//! pool, selects a batch, reveals its labels and scores a K-nearest-neighbour
//! proxy classifier on the held-out test split. Valuation uses the
//! validation split only; the test split is never seen by the selector.

use std::collections::BTreeSet;
use std::time::{Duration, Instant};

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{reveal_labels, FeatureDataset, SplitAssignment};
use crate::error::{ensure, Result};
use crate::extrapolation::{extrapolate_values, RegressionConfig};
use crate::points::{neighbor_order, LabeledSet};
use crate::reduce::mean_std;
use crate::selection::{ads_enhanced, PreselectSpec, SelectionBatch, Selector, StageTimings};
use crate::valuation::{knn_shapley_exact, UtilitySpec};

/// A selector, optionally wrapped in value-based pre-selection.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MethodConfig {
    pub selector: Selector,
    #[serde(default)]
    pub ads: Option<PreselectSpec>,
    /// Label used in reports; derived from the selector when absent.
    #[serde(default)]
    pub name: Option<String>,
}

impl MethodConfig {
    pub fn bare(selector: Selector) -> Self {
        Self { selector, ads: None, name: None }
    }

    pub fn ads(selector: Selector, preselect: PreselectSpec) -> Self {
        Self { selector, ads: Some(preselect), name: None }
    }

    pub fn label(&self) -> String {
        match (&self.name, &self.ads) {
            (Some(name), _) => name.clone(),
            (None, Some(_)) => format!("ads+{}", self.selector.tag()),
            (None, None) => self.selector.tag().to_string(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoopConfig {
    /// Points sampled from the dataset's labeled split to start from.
    pub initial_pool_size: usize,
    pub batch_size: usize,
    pub num_rounds: usize,
    pub method: MethodConfig,
    #[serde(default)]
    pub utility: UtilitySpec,
    #[serde(default)]
    pub regression: RegressionConfig,
    #[serde(default)]
    pub seed: u64,
    /// When false every stage timing is reported as zero, making reports
    /// byte-reproducible.
    #[serde(default = "yes")]
    pub record_timings: bool,
}

fn yes() -> bool {
    true
}

impl LoopConfig {
    pub fn validate(&self) -> Result<()> {
        ensure!(self.batch_size >= 1, Validation, "batch_size must be at least 1");
        ensure!(self.num_rounds >= 1, Validation, "num_rounds must be at least 1");
        ensure!(self.initial_pool_size >= 1, Validation, "initial_pool_size must be at least 1");
        self.utility.validate()?;
        self.regression.validate()?;
        if let Some(ads) = &self.method.ads {
            ads.validate()?;
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ValueSummary {
    pub mean: f64,
    pub min: f64,
    pub max: f64,
    pub negative_fraction: f64,
}

impl ValueSummary {
    fn of(values: &[f64]) -> Self {
        let (mean, _) = mean_std(values);
        Self {
            mean,
            min: values.iter().copied().fold(f64::INFINITY, f64::min),
            max: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            negative_fraction: values.iter().filter(|v| **v < 0.0).count() as f64 / values.len() as f64,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RoundRecord {
    pub round: usize,
    pub chosen: Vec<u64>,
    pub timings: StageTimings,
    /// Proxy test accuracy after the batch was labeled.
    pub accuracy: f64,
    pub labeled_size: usize,
    /// Shapley values of the labeled set this round (ADS methods only).
    pub labeled_values: Option<ValueSummary>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LoopState {
    pub round: usize,
    pub splits: SplitAssignment,
    pub initial_accuracy: f64,
    pub records: Vec<RoundRecord>,
    /// Set once the pool is exhausted.
    pub terminal: bool,
    seed: u64,
}

/// Plurality-vote KNN accuracy on `test`; vote ties go to the smallest
/// class id.
pub fn evaluate_proxy(labeled: &LabeledSet, test: &LabeledSet, k: usize) -> Result<f64> {
    ensure!(!labeled.is_empty(), Precondition, "proxy needs labeled points");
    ensure!(!test.is_empty(), Precondition, "proxy needs test points");
    ensure!(k >= 1, Validation, "K must be at least 1");
    let voters = k.min(labeled.len());
    let classes = labeled.num_classes.max(test.num_classes) as usize;
    let correct: usize = (0..test.len())
        .into_par_iter()
        .map(|j| {
            let order = neighbor_order(test.row(j), &labeled.points, crate::points::Metric::Euclidean);
            let mut counts = vec![0usize; classes];
            for &(_, p) in &order[..voters] {
                counts[labeled.labels[p] as usize] += 1;
            }
            let mut best = 0;
            for c in 1..classes {
                if counts[c] > counts[best] {
                    best = c;
                }
            }
            usize::from(best as u32 == test.labels[j])
        })
        .sum();
    Ok(correct as f64 / test.len() as f64)
}

fn mix(seed: u64, salt: u64) -> u64 {
    // splitmix64 finaliser
    let mut z = seed.wrapping_add(salt.wrapping_mul(0x9e37_79b9_7f4a_7c15));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Starting state: a seeded sample of the labeled split, the full pool, and
/// the validation and test splits unchanged.
pub fn initial_state(
    dataset: &FeatureDataset,
    splits: &SplitAssignment,
    config: &LoopConfig,
    seed: u64,
) -> Result<LoopState> {
    config.validate()?;
    splits.validate(dataset)?;
    ensure!(!splits.validation.is_empty(), Validation, "validation split is empty");
    ensure!(!splits.test.is_empty(), Validation, "test split is empty");
    ensure!(
        config.initial_pool_size <= splits.labeled.len(),
        Validation,
        "initial pool of {} exceeds the {} points of the labeled split",
        config.initial_pool_size,
        splits.labeled.len()
    );
    let candidates: Vec<u64> = splits.labeled.iter().copied().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(mix(seed, 0));
    let initial: BTreeSet<u64> = index::sample(&mut rng, candidates.len(), config.initial_pool_size)
        .into_iter()
        .map(|i| candidates[i])
        .collect();
    let labeled = dataset.labeled(&initial)?;
    let test = dataset.labeled(&splits.test)?;
    let initial_accuracy = evaluate_proxy(&labeled, &test, config.utility.k)?;
    Ok(LoopState {
        round: 0,
        splits: SplitAssignment {
            labeled: initial,
            unlabeled: splits.unlabeled.clone(),
            validation: splits.validation.clone(),
            test: splits.test.clone(),
        },
        initial_accuracy,
        records: Vec::new(),
        terminal: splits.unlabeled.is_empty(),
        seed,
    })
}

/// One acquisition round.
pub fn run_round(dataset: &FeatureDataset, mut state: LoopState, config: &LoopConfig) -> Result<LoopState> {
    ensure!(!state.splits.unlabeled.is_empty(), Precondition, "the unlabeled pool is exhausted");
    let round = state.round + 1;
    let labeled = dataset.labeled(&state.splits.labeled)?;
    let pool = dataset.points(&state.splits.unlabeled)?;
    let selector = config.method.selector.reseeded(mix(state.seed, round as u64));

    let (batch, labeled_values): (SelectionBatch, Option<ValueSummary>) = match &config.method.ads {
        None => (selector.select(&pool, &labeled, config.batch_size)?, None),
        Some(preselect) => {
            let validation = dataset.labeled(&state.splits.validation)?;
            let t0 = Instant::now();
            let values = knn_shapley_exact(&labeled, &validation, &config.utility)?;
            let t_valuation = t0.elapsed();
            let t1 = Instant::now();
            let pool_values = extrapolate_values(&pool, &labeled, &values, config.utility.k, &config.regression)?;
            let t_regression = t1.elapsed();
            let mut batch = ads_enhanced(&selector, &pool_values, preselect, &pool, &labeled, config.batch_size)?;
            batch.stage_timings.valuation = t_valuation;
            batch.stage_timings.regression = t_regression;
            (batch, Some(ValueSummary::of(&values.values)))
        }
    };

    let before = state.splits.labeled.len() + state.splits.unlabeled.len();
    reveal_labels(dataset, &state.splits, &batch.chosen)?;
    state.splits.mark_labeled(&batch.chosen)?;
    debug_assert_eq!(before, state.splits.labeled.len() + state.splits.unlabeled.len());

    let labeled = dataset.labeled(&state.splits.labeled)?;
    let test = dataset.labeled(&state.splits.test)?;
    let accuracy = evaluate_proxy(&labeled, &test, config.utility.k)?;
    let timings = if config.record_timings { batch.stage_timings } else { StageTimings::default() };
    state.records.push(RoundRecord {
        round,
        chosen: batch.chosen,
        timings,
        accuracy,
        labeled_size: state.splits.labeled.len(),
        labeled_values,
    });
    state.round = round;
    state.terminal = state.splits.unlabeled.is_empty();
    Ok(state)
}

/// Runs rounds until `num_rounds` or the pool runs out.
pub fn run_loop(
    dataset: &FeatureDataset,
    splits: &SplitAssignment,
    config: &LoopConfig,
    seed: u64,
) -> Result<LoopState> {
    let mut state = initial_state(dataset, splits, config, seed)?;
    while state.round < config.num_rounds && !state.terminal {
        state = run_round(dataset, state, config)?;
    }
    Ok(state)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RepeatRecord {
    pub repeat: usize,
    pub seed: u64,
    pub initial_accuracy: f64,
    pub rounds: Vec<RoundRecord>,
}

/// Mean over repeats for one round of one method.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RoundSummary {
    pub round: usize,
    pub accuracy_mean: f64,
    pub accuracy_std: f64,
    pub t_valuation_us: f64,
    pub t_regress_us: f64,
    pub t_preselect_us: f64,
    pub t_diversify_us: f64,
}

impl RoundSummary {
    /// Mean total selection time, all stages included.
    pub fn total_us(&self) -> f64 {
        self.t_valuation_us + self.t_regress_us + self.t_preselect_us + self.t_diversify_us
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MethodReport {
    pub method: String,
    pub config: LoopConfig,
    pub rounds: Vec<RoundSummary>,
    pub repeats: Vec<RepeatRecord>,
}

impl MethodReport {
    pub fn final_round(&self) -> Option<&RoundSummary> {
        self.rounds.last()
    }

    /// Per-repeat accuracies of the given round (1-based).
    pub fn accuracies(&self, round: usize) -> Vec<f64> {
        self.repeats.iter().filter_map(|r| r.rounds.get(round - 1).map(|rec| rec.accuracy)).collect()
    }

    /// Mean selection time per round across every round and repeat.
    pub fn mean_selection_us(&self) -> f64 {
        let totals: Vec<f64> = self.rounds.iter().map(RoundSummary::total_us).collect();
        mean_std(&totals).0
    }
}

fn us(d: Duration) -> f64 {
    d.as_secs_f64() * 1e6
}

/// Independent seeded loops of one method; repeat `r` uses a seed derived
/// from `config.seed` and `r`.
pub fn run_experiment(
    dataset: &FeatureDataset,
    splits: &SplitAssignment,
    config: &LoopConfig,
    repeats: usize,
) -> Result<MethodReport> {
    ensure!(repeats >= 1, Validation, "repeats must be at least 1");
    config.validate()?;
    let mut records = Vec::with_capacity(repeats);
    for repeat in 0..repeats {
        let seed = mix(config.seed, 1 + repeat as u64);
        let state = run_loop(dataset, splits, config, seed)?;
        records.push(RepeatRecord { repeat, seed, initial_accuracy: state.initial_accuracy, rounds: state.records });
    }
    let max_rounds = records.iter().map(|r| r.rounds.len()).max().unwrap_or(0);
    let rounds = (0..max_rounds)
        .map(|i| {
            let present: Vec<&RoundRecord> = records.iter().filter_map(|r| r.rounds.get(i)).collect();
            let acc: Vec<f64> = present.iter().map(|r| r.accuracy).collect();
            let stage = |f: fn(&StageTimings) -> Duration| {
                mean_std(&present.iter().map(|r| us(f(&r.timings))).collect::<Vec<_>>()).0
            };
            let (accuracy_mean, accuracy_std) = mean_std(&acc);
            RoundSummary {
                round: i + 1,
                accuracy_mean,
                accuracy_std,
                t_valuation_us: stage(|t| t.valuation),
                t_regress_us: stage(|t| t.regression),
                t_preselect_us: stage(|t| t.preselect),
                t_diversify_us: stage(|t| t.diversify),
            }
        })
        .collect();
    Ok(MethodReport { method: config.method.label(), config: config.clone(), rounds, repeats: records })
}

/// Bare selector time over the time of its value-filtered counterpart,
/// valuation and regression included.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EfficiencyRatio {
    pub bare: String,
    pub ads: String,
    pub bare_us: f64,
    pub ads_us: f64,
    pub ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExperimentReport {
    pub methods: Vec<MethodReport>,
    pub efficiency: Vec<EfficiencyRatio>,
}

/// Runs every configuration and pairs each value-filtered method with the
/// bare method using the same selector kind.
pub fn run_comparison(
    dataset: &FeatureDataset,
    splits: &SplitAssignment,
    configs: &[LoopConfig],
    repeats: usize,
) -> Result<ExperimentReport> {
    let methods = configs.iter().map(|c| run_experiment(dataset, splits, c, repeats)).collect::<Result<Vec<_>>>()?;
    let mut efficiency = Vec::new();
    for ads in methods.iter().filter(|m| m.config.method.ads.is_some()) {
        let tag = ads.config.method.selector.tag();
        let Some(bare) =
            methods.iter().find(|m| m.config.method.ads.is_none() && m.config.method.selector.tag() == tag)
        else {
            continue;
        };
        if !(ads.config.record_timings && bare.config.record_timings) {
            continue;
        }
        let (bare_us, ads_us) = (bare.mean_selection_us(), ads.mean_selection_us());
        efficiency.push(EfficiencyRatio {
            bare: bare.method.clone(),
            ads: ads.method.clone(),
            bare_us,
            ads_us,
            ratio: bare_us / ads_us,
        });
    }
    Ok(ExperimentReport { methods, efficiency })
}

impl ExperimentReport {
    pub fn method(&self, label: &str) -> Option<&MethodReport> {
        self.methods.iter().find(|m| m.method == label)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialises")
    }

    /// One row per (method, round).
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([
            "round",
            "method",
            "accuracy_mean",
            "accuracy_std",
            "t_valuation_us",
            "t_regress_us",
            "t_preselect_us",
            "t_diversify_us",
        ])
        .unwrap();
        for m in &self.methods {
            for r in &m.rounds {
                w.write_record([
                    r.round.to_string(),
                    m.method.clone(),
                    r.accuracy_mean.to_string(),
                    r.accuracy_std.to_string(),
                    r.t_valuation_us.round().to_string(),
                    r.t_regress_us.round().to_string(),
                    r.t_preselect_us.round().to_string(),
                    r.t_diversify_us.round().to_string(),
                ])
                .unwrap();
            }
        }
        String::from_utf8(w.into_inner().expect("in-memory writer")).unwrap()
    }
}
