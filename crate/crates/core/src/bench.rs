//! Timing harness comparing a bare selector against its value-filtered
//! version on synthetic pools of increasing size.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{ensure, Result};
use crate::extrapolation::{extrapolate_values, RegressionConfig};
use crate::scenario::{generate_scenario, ScenarioKind, ScenarioSpec, SplitSizes};
use crate::selection::{ads_enhanced, PreselectSpec, Selector};
use crate::valuation::{knn_shapley_exact, UtilitySpec};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchConfig {
    pub pool_sizes: Vec<usize>,
    pub dims: usize,
    pub num_classes: u32,
    pub labeled: usize,
    pub validation: usize,
    pub batch_size: usize,
    pub preselect: PreselectSpec,
    pub selectors: Vec<Selector>,
    /// Timed runs per (selector, pool size); the mean is reported.
    pub repeats: usize,
    pub utility: UtilitySpec,
    pub regression: RegressionConfig,
    pub seed: u64,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            pool_sizes: vec![10_000, 100_000],
            dims: 32,
            num_classes: 10,
            labeled: 100,
            validation: 500,
            batch_size: 1000,
            preselect: PreselectSpec::new(0.1),
            selectors: vec![Selector::Coreset],
            repeats: 1,
            utility: UtilitySpec::default(),
            regression: RegressionConfig::default(),
            seed: 0,
        }
    }
}

/// Mean timings in microseconds for one selector at one pool size.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BenchRow {
    pub selector: String,
    pub pool_size: usize,
    pub bare_diversify_us: f64,
    pub ads_valuation_us: f64,
    pub ads_regression_us: f64,
    pub ads_preselect_us: f64,
    pub ads_diversify_us: f64,
    /// `ads_diversify_us / bare_diversify_us`.
    pub diversify_ratio: f64,
    /// `bare_diversify_us` over the sum of every ADS stage.
    pub speedup: f64,
}

impl BenchRow {
    pub fn ads_total_us(&self) -> f64 {
        self.ads_valuation_us + self.ads_regression_us + self.ads_preselect_us + self.ads_diversify_us
    }
}

pub fn run_bench(cfg: &BenchConfig) -> Result<Vec<BenchRow>> {
    ensure!(!cfg.pool_sizes.is_empty(), Validation, "pool_sizes must not be empty");
    ensure!(cfg.repeats >= 1, Validation, "repeats must be at least 1");
    cfg.preselect.validate()?;
    let mut rows = Vec::new();
    for &pool_size in &cfg.pool_sizes {
        let mut spec = ScenarioSpec::new(ScenarioKind::Identity, cfg.seed);
        spec.params.dims = cfg.dims;
        spec.params.num_classes = Some(cfg.num_classes);
        let g = generate_scenario(&spec, SplitSizes::new(cfg.labeled, pool_size, cfg.validation, 1))?;
        let labeled = g.dataset.labeled(&g.splits.labeled)?;
        let validation = g.dataset.labeled(&g.splits.validation)?;
        let pool = g.dataset.points(&g.splits.unlabeled)?;

        for selector in &cfg.selectors {
            let mut acc = [0f64; 5];
            for _ in 0..cfg.repeats {
                let bare = selector.select(&pool, &labeled, cfg.batch_size)?;
                acc[0] += bare.stage_timings.diversify.as_secs_f64();

                let t = Instant::now();
                let values = knn_shapley_exact(&labeled, &validation, &cfg.utility)?;
                acc[1] += t.elapsed().as_secs_f64();
                let t = Instant::now();
                let pool_values = extrapolate_values(&pool, &labeled, &values, cfg.utility.k, &cfg.regression)?;
                acc[2] += t.elapsed().as_secs_f64();
                let ads = ads_enhanced(selector, &pool_values, &cfg.preselect, &pool, &labeled, cfg.batch_size)?;
                acc[3] += ads.stage_timings.preselect.as_secs_f64();
                acc[4] += ads.stage_timings.diversify.as_secs_f64();
            }
            let us = |s: f64| s / cfg.repeats as f64 * 1e6;
            let mut row = BenchRow {
                selector: selector.tag().to_string(),
                pool_size,
                bare_diversify_us: us(acc[0]),
                ads_valuation_us: us(acc[1]),
                ads_regression_us: us(acc[2]),
                ads_preselect_us: us(acc[3]),
                ads_diversify_us: us(acc[4]),
                diversify_ratio: 0.0,
                speedup: 0.0,
            };
            row.diversify_ratio = row.ads_diversify_us / row.bare_diversify_us;
            row.speedup = row.bare_diversify_us / row.ads_total_us();
            rows.push(row);
        }
    }
    Ok(rows)
}

pub fn bench_csv(rows: &[BenchRow]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.serialize(row).expect("bench row serialises");
    }
    String::from_utf8(w.into_inner().expect("in-memory writer")).unwrap()
}
