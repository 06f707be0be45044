//! Value-filtered batch active learning in a fixed feature space.
//!
//! The crate computes exact Data Shapley values of labeled points under a
//! K-nearest-neighbour utility, extrapolates them to unlabeled points,
//! and uses the predicted values to shrink the pool before a diversity
//! selector such as greedy k-center picks the next batch to label.
//!
//! ```
//! use shapley_select::{knn_shapley_exact, LabeledSet, UtilitySpec};
//!
//! let train = LabeledSet::from_rows(&[[0.0f32], [1.0], [4.0]], &[0, 0, 1], 2)?;
//! let validation = LabeledSet::from_rows(&[[0.2f32], [3.5]], &[0, 1], 2)?;
//! let values = knn_shapley_exact(&train, &validation, &UtilitySpec::new(1))?;
//! let total: f64 = values.values.iter().sum();
//! assert!((total - values.utility_total.unwrap()).abs() < 1e-12);
//! # Ok::<(), shapley_select::Error>(())
//! ```

pub mod active_loop;
pub mod bench;
pub mod dataset;
pub mod error;
pub mod extrapolation;
mod fsio;
pub mod points;
pub mod reduce;
pub mod scenario;
pub mod selection;
pub mod valuation;

pub use active_loop::{
    evaluate_proxy, initial_state, run_comparison, run_experiment, run_loop, run_round, ExperimentReport, LoopConfig,
    LoopState, MethodConfig, MethodReport,
};
pub use bench::{run_bench, BenchConfig, BenchRow};
pub use dataset::{load_dataset, reveal_labels, save_dataset, FeatureDataset, SplitAssignment};
pub use error::{Error, Result};
pub use extrapolation::{
    aggregate, candidate_classes, extrapolate_values, fit_value_regressors, predict_values, AggregatedValues,
    Aggregation, ClassConditionalValues, RegressionConfig,
};
pub use fsio::write_atomic;
pub use points::{FeatureMatrix, LabeledSet, Metric, PointSet};
pub use scenario::{generate_scenario, GeneratedScenario, ScenarioKind, ScenarioSpec, SplitSizes};
pub use selection::{
    ads_enhanced, badge_select, coreset_greedy, entropy_select, k_medians, preselect, random_select, PreselectSpec,
    ProbeConfig, SelectionBatch, Selector, StageTimings,
};
pub use valuation::{
    brute_force_shapley, knn_shapley_exact, knn_utility, tmc_shapley, tmc_shapley_exhaustive, TmcConfig, UtilitySpec,
    ValuationMethod, ValuationResult,
};
