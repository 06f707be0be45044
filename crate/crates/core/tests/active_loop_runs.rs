//! End-to-end acquisition loops on generated scenarios.

mod common;

use std::collections::BTreeSet;

use shapley_select::{
    evaluate_proxy, generate_scenario, initial_state, knn_shapley_exact, run_comparison, run_experiment, run_loop,
    run_round, Aggregation, LabeledSet, LoopConfig, MethodConfig, PreselectSpec, RegressionConfig, ScenarioKind,
    ScenarioSpec, Selector, SplitSizes, UtilitySpec,
};

fn config(method: MethodConfig, initial: usize, batch: usize, rounds: usize) -> LoopConfig {
    LoopConfig {
        initial_pool_size: initial,
        batch_size: batch,
        num_rounds: rounds,
        method,
        utility: UtilitySpec::new(5),
        regression: RegressionConfig::default(),
        seed: 17,
        record_timings: true,
    }
}

fn identity(sizes: SplitSizes) -> shapley_select::GeneratedScenario {
    let mut spec = ScenarioSpec::new(ScenarioKind::Identity, 2);
    spec.params.dims = 4;
    spec.params.num_classes = Some(3);
    generate_scenario(&spec, sizes).unwrap()
}

#[test]
fn proxy_counts_exact_copies_and_single_class_votes() {
    let labeled = LabeledSet::from_rows(&[[0.0f32], [5.0]], &[0, 1], 2).unwrap();
    assert_eq!(evaluate_proxy(&labeled, &labeled, 1).unwrap(), 1.0);
    let one_class = LabeledSet::from_rows(&[[0.0f32], [5.0]], &[1, 1], 2).unwrap();
    let test = LabeledSet::from_rows(&[[0.0f32], [1.0], [2.0], [3.0]], &[0, 1, 1, 0], 2).unwrap();
    assert_eq!(evaluate_proxy(&one_class, &test, 1).unwrap(), 0.5);
}

#[test]
fn proxy_matches_a_hand_counted_vote() {
    let labeled = LabeledSet::from_rows(&[[0.0f32], [1.0], [2.0], [10.0]], &[0, 1, 1, 0], 2).unwrap();
    // Query 0.4: nearest three are 0 (class 0), 1 (class 1), 2 (class 1) -> class 1.
    // Query 9.0: nearest three are 10 (0), 2 (1), 1 (1) -> class 1.
    // Query 0.9 with K = 2: 1 (1), 0 (0) -> tie, smallest class wins -> 0.
    let test = LabeledSet::from_rows(&[[0.4f32], [9.0]], &[1, 0], 2).unwrap();
    assert_eq!(evaluate_proxy(&labeled, &test, 3).unwrap(), 0.5);
    let tie = LabeledSet::from_rows(&[[0.9f32]], &[0], 2).unwrap();
    assert_eq!(evaluate_proxy(&labeled, &tie, 2).unwrap(), 1.0);
}

#[test]
fn pool_of_one_batch_is_exhausted_in_one_round() {
    let g = identity(SplitSizes::new(10, 8, 20, 20));
    let cfg = config(MethodConfig::bare(Selector::Random { seed: 0 }), 10, 8, 1);
    let state = run_loop(&g.dataset, &g.splits, &cfg, 1).unwrap();
    assert!(state.terminal);
    assert!(state.splits.unlabeled.is_empty());
    assert_eq!(state.splits.labeled.len(), 18);
}

#[test]
fn partial_final_batch_and_early_stop() {
    let g = identity(SplitSizes::new(10, 25, 20, 20));
    let cfg = config(MethodConfig::bare(Selector::Coreset), 5, 10, 5);
    let state = run_loop(&g.dataset, &g.splits, &cfg, 1).unwrap();
    let sizes: Vec<usize> = state.records.iter().map(|r| r.chosen.len()).collect();
    assert_eq!(sizes, vec![10, 10, 5]);
    assert!(state.terminal);
    assert!(run_round(&g.dataset, state, &cfg).is_err());
}

#[test]
fn labeled_and_pool_are_conserved_and_grow_by_the_batch() {
    let g = identity(SplitSizes::new(30, 300, 60, 60));
    for method in [
        MethodConfig::bare(Selector::Coreset),
        MethodConfig::ads(Selector::Coreset, PreselectSpec::new(0.3)),
        MethodConfig::ads(Selector::KMedians { iters: 3, seed: 0 }, PreselectSpec::new(0.5)),
    ] {
        let cfg = config(method, 12, 7, 4);
        let mut state = initial_state(&g.dataset, &g.splits, &cfg, 5).unwrap();
        let universe: BTreeSet<u64> = state.splits.labeled.union(&state.splits.unlabeled).copied().collect();
        let mut seen: BTreeSet<u64> = state.splits.labeled.clone();
        for t in 1..=4 {
            state = run_round(&g.dataset, state, &cfg).unwrap();
            assert_eq!(state.splits.labeled.len(), 12 + t * 7);
            let now: BTreeSet<u64> = state.splits.labeled.union(&state.splits.unlabeled).copied().collect();
            assert_eq!(now, universe);
            assert!(state.splits.labeled.is_disjoint(&state.splits.unlabeled));
            for id in &state.records.last().unwrap().chosen {
                assert!(seen.insert(*id), "{id} labeled twice");
            }
        }
        assert_eq!(state.records.iter().map(|r| r.round).collect::<Vec<_>>(), vec![1, 2, 3, 4]);
    }
}

#[test]
fn full_fraction_ads_chooses_what_bare_coreset_chooses() {
    let g = identity(SplitSizes::new(30, 400, 60, 60));
    let bare = run_loop(&g.dataset, &g.splits, &config(MethodConfig::bare(Selector::Coreset), 10, 9, 3), 3).unwrap();
    let ads_cfg = config(MethodConfig::ads(Selector::Coreset, PreselectSpec::new(1.0)), 10, 9, 3);
    let ads = run_loop(&g.dataset, &g.splits, &ads_cfg, 3).unwrap();
    for (a, b) in ads.records.iter().zip(&bare.records) {
        assert_eq!(a.chosen, b.chosen);
        assert_eq!(a.accuracy, b.accuracy);
    }
}

#[test]
fn ads_timing_total_is_the_sum_of_its_stages() {
    let g = identity(SplitSizes::new(30, 400, 60, 60));
    let cfg = config(MethodConfig::ads(Selector::Coreset, PreselectSpec::new(0.2)), 10, 9, 2);
    let state = run_loop(&g.dataset, &g.splits, &cfg, 3).unwrap();
    for r in &state.records {
        let t = r.timings;
        assert_eq!(t.total(), t.valuation + t.regression + t.preselect + t.diversify);
        assert!(t.valuation > std::time::Duration::ZERO || t.regression > std::time::Duration::ZERO);
        assert!(r.labeled_values.is_some());
    }
    let report = run_experiment(&g.dataset, &g.splits, &cfg, 2).unwrap();
    for round in &report.rounds {
        let sum = round.t_valuation_us + round.t_regress_us + round.t_preselect_us + round.t_diversify_us;
        assert_eq!(round.total_us(), sum);
    }
}

#[test]
fn reports_are_reproducible_without_timings() {
    let g = identity(SplitSizes::new(30, 300, 60, 60));
    let mut configs = vec![
        config(MethodConfig::ads(Selector::Coreset, PreselectSpec::new(0.3)), 10, 8, 2),
        config(MethodConfig::bare(Selector::Badge { probe: Default::default() }), 10, 8, 2),
        config(MethodConfig::bare(Selector::Random { seed: 0 }), 10, 8, 2),
    ];
    configs.iter_mut().for_each(|c| c.record_timings = false);
    let a = run_comparison(&g.dataset, &g.splits, &configs, 3).unwrap();
    let b = run_comparison(&g.dataset, &g.splits, &configs, 3).unwrap();
    assert_eq!(a.to_json(), b.to_json());
    assert_eq!(a.to_csv(), b.to_csv());
    assert!(a.efficiency.is_empty());
    let header = a.to_csv().lines().next().unwrap().to_string();
    assert_eq!(
        header,
        "round,method,accuracy_mean,accuracy_std,t_valuation_us,t_regress_us,t_preselect_us,t_diversify_us"
    );
}

#[test]
fn random_selection_accuracy_does_not_fall_on_average() {
    let g = identity(SplitSizes::new(40, 600, 80, 300));
    let cfg = config(MethodConfig::bare(Selector::Random { seed: 0 }), 6, 6, 5);
    let report = run_experiment(&g.dataset, &g.splits, &cfg, 24).unwrap();
    let initial: Vec<f64> = report.repeats.iter().map(|r| r.initial_accuracy).collect();
    let mut prev = common::mean_std(&initial);
    for round in &report.rounds {
        assert!(
            round.accuracy_mean >= prev.0 - prev.1.max(round.accuracy_std),
            "round {}: {} after {}",
            round.round,
            round.accuracy_mean,
            prev.0
        );
        prev = (round.accuracy_mean, round.accuracy_std);
    }
}

/// Two classes in 2-d; a fifth of class 0 is a wide component sitting just
/// past class 1, present only in the training splits.
fn minority_scenario() -> shapley_select::GeneratedScenario {
    let mut spec = ScenarioSpec::new(ScenarioKind::GaussianMixtureMinority, 3);
    spec.params.dims = 2;
    spec.params.class_separation = 2.0;
    spec.params.minority_weight = 0.2;
    spec.params.minority_shift = 1.3;
    spec.params.minority_spread = 1.0;
    spec.params.minority_in_evaluation = false;
    generate_scenario(&spec, SplitSizes::new(200, 3000, 300, 1000)).unwrap()
}

#[test]
fn minority_points_carry_negative_value() {
    let g = minority_scenario();
    let labeled = g.dataset.labeled(&g.splits.labeled).unwrap();
    let validation = g.dataset.labeled(&g.splits.validation).unwrap();
    let values = knn_shapley_exact(&labeled, &validation, &UtilitySpec::new(5)).unwrap();
    type Valued = Vec<(u64, f64)>;
    let (minority, rest): (Valued, Valued) = values
        .ids
        .iter()
        .copied()
        .zip(values.values.iter().copied())
        .partition(|(id, _)| g.record.minority.contains(id));
    let mean = |xs: &[(u64, f64)]| xs.iter().map(|x| x.1).sum::<f64>() / xs.len() as f64;
    assert!(mean(&minority) < 0.0, "minority mean {}", mean(&minority));
    assert!(mean(&rest) > 0.0);
}

#[test]
fn value_filter_beats_bare_coreset_on_the_minority_scenario() {
    let g = minority_scenario();
    let mut ads = config(MethodConfig::ads(Selector::Coreset, PreselectSpec::new(0.3)), 20, 20, 1);
    ads.regression = RegressionConfig { k_neighbors: 1, aggregation: Aggregation::Mean, ..Default::default() };
    ads.record_timings = false;
    let bare = LoopConfig { method: MethodConfig::bare(Selector::Coreset), ..ads.clone() };
    let report = run_comparison(&g.dataset, &g.splits, &[ads, bare], 10).unwrap();
    let acc = |label: &str| report.method(label).unwrap().rounds[0].accuracy_mean;
    assert!(acc("ads+coreset") > acc("coreset"), "{} vs {}", acc("ads+coreset"), acc("coreset"));
    let picked = |label: &str| -> usize {
        report
            .method(label)
            .unwrap()
            .repeats
            .iter()
            .flat_map(|r| &r.rounds[0].chosen)
            .filter(|id| g.record.minority.contains(id))
            .count()
    };
    assert!(picked("ads+coreset") <= picked("coreset"));
}

#[test]
fn invalid_configs_are_rejected() {
    let g = identity(SplitSizes::new(10, 20, 10, 10));
    let mut cfg = config(MethodConfig::bare(Selector::Coreset), 5, 0, 1);
    assert!(run_loop(&g.dataset, &g.splits, &cfg, 0).is_err());
    cfg.batch_size = 2;
    cfg.num_rounds = 0;
    assert!(run_loop(&g.dataset, &g.splits, &cfg, 0).is_err());
    cfg.num_rounds = 1;
    cfg.initial_pool_size = 11;
    assert!(run_loop(&g.dataset, &g.splits, &cfg, 0).is_err());
    cfg.initial_pool_size = 5;
    cfg.method = MethodConfig::ads(Selector::Coreset, PreselectSpec::new(0.0));
    assert!(run_loop(&g.dataset, &g.splits, &cfg, 0).is_err());
    assert!(run_experiment(&g.dataset, &g.splits, &config(MethodConfig::bare(Selector::Coreset), 5, 2, 1), 0).is_err());
}
