//! Loop invariants: budget, pairing, append-only data and stateless
//! retraining.

use std::sync::Arc;

use ifa_core::dataset::{self, Background, Dataset};
use ifa_core::engine::{self, evaluate, LoopConfig, StrategyKind};
use ifa_core::expert::{AttributionMethod, Expert};
use ifa_core::models::{Model, ModelKind, ModelSpec};
use proptest::prelude::*;

struct Setup {
    pool: Dataset,
    test: Dataset,
    oracle: Arc<Model>,
    background: Background,
    spec: ModelSpec,
}

fn setup(classification: bool, data_seed: u64, m: usize) -> Setup {
    let (pool, test, gt) = if classification {
        dataset::generate_logistic(data_seed, 40, 20, m).unwrap()
    } else {
        dataset::generate_linear(data_seed, 40, 20, m).unwrap()
    };
    let background = dataset::compute_background(&pool.concat(&test).unwrap());
    let kind = if classification { ModelKind::LogisticRegression } else { ModelKind::LinearRegression };
    let mut spec = ModelSpec::default_for(kind);
    if classification {
        spec = spec.with("epochs", 50.0).unwrap();
    }
    Setup {
        pool,
        test,
        oracle: Arc::new(Model::from_ground_truth(&gt)),
        background,
        spec,
    }
}

fn config(s: &Setup, strategy: StrategyKind, q: usize, iterations: usize, seed: u64) -> LoopConfig {
    LoopConfig {
        strategy,
        query_size: q,
        iterations,
        k: None,
        background: s.background.clone(),
        model: s.spec.clone(),
        expert: Expert::ground_truth(Arc::clone(&s.oracle), AttributionMethod::Occlusion),
        seed,
    }
}

const SIMULATED: [StrategyKind; 7] = [
    StrategyKind::Baseline,
    StrategyKind::Caipi,
    StrategyKind::CaipiSingle,
    StrategyKind::InteractiveOcclusion,
    StrategyKind::InteractiveShap,
    StrategyKind::InteractiveSingleOcclusion,
    StrategyKind::InteractiveSingleShap,
];

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn budget_and_pairing(
        classification in any::<bool>(),
        data_seed in any::<u64>(),
        seed in any::<u64>(),
        m in 1usize..5,
        q in 1usize..4,
        iterations in 1usize..5,
    ) {
        let s = setup(classification, data_seed, m);
        let initial = if classification { 2 } else { 0 };
        let mut queries = None;
        for strategy in SIMULATED {
            let r = engine::run(&config(&s, strategy, q, iterations, seed), s.pool.clone(), s.test.clone(), "t").unwrap();
            prop_assert_eq!(r.metric_series.len(), iterations + 1);
            for (t, &c) in r.cumulative_samples.iter().enumerate() {
                prop_assert_eq!(c, initial + t * q * (1 + 2 * m), "{:?}", strategy);
            }
            match &queries {
                None => queries = Some(r.queries.clone()),
                Some(qs) => prop_assert_eq!(qs, &r.queries, "{:?}", strategy),
            }
        }
    }

    #[test]
    fn retraining_is_stateless_and_data_append_only(
        classification in any::<bool>(),
        data_seed in any::<u64>(),
        seed in any::<u64>(),
        strategy in prop::sample::select(SIMULATED.to_vec()),
    ) {
        let s = setup(classification, data_seed, 3);
        let state = engine::run_state(&config(&s, strategy, 2, 3, seed), s.pool.clone(), s.test.clone()).unwrap();
        let shorter = engine::run_state(&config(&s, strategy, 2, 2, seed), s.pool.clone(), s.test.clone()).unwrap();
        prop_assert!(state.training_set().starts_with(shorter.training_set()));

        for entry in state.history() {
            let prefix = &state.training_set()[..entry.cumulative_samples];
            let model = if prefix.is_empty() {
                Model::untrained(&s.spec, s.pool.task(), s.pool.n_features())
            } else {
                let data = s.pool.with_rows(
                    prefix.iter().map(|x| x.features.clone()).collect(),
                    prefix.iter().map(|x| x.target).collect(),
                ).unwrap();
                Model::fit(&s.spec, &data).unwrap()
            };
            prop_assert_eq!(evaluate(&model, &s.test).unwrap().to_bits(), entry.metric.to_bits());
        }
    }
}

#[test]
fn runs_are_deterministic() {
    let s = setup(true, 3, 4);
    for strategy in SIMULATED {
        let a = engine::run(&config(&s, strategy, 2, 3, 11), s.pool.clone(), s.test.clone(), "t").unwrap();
        let b = engine::run(&config(&s, strategy, 2, 3, 11), s.pool.clone(), s.test.clone(), "t").unwrap();
        assert_eq!(a, b);
    }
}

#[test]
fn queried_samples_are_not_repeated() {
    let s = setup(false, 1, 2);
    let r = engine::run(&config(&s, StrategyKind::Baseline, 3, 10, 0), s.pool.clone(), s.test.clone(), "t").unwrap();
    let mut all: Vec<usize> = r.queries.concat();
    let n = all.len();
    all.sort();
    all.dedup();
    assert_eq!(all.len(), n);
}

#[test]
fn exhausted_pool_is_an_error() {
    let s = setup(false, 1, 2);
    // the second query takes the 10 that remain, the third finds none
    let r = engine::run(&config(&s, StrategyKind::Baseline, 30, 2, 0), s.pool.clone(), s.test.clone(), "t").unwrap();
    assert_eq!(r.queries[1].len(), 10);
    let r = engine::run(&config(&s, StrategyKind::Baseline, 30, 3, 0), s.pool.clone(), s.test.clone(), "t");
    assert!(r.is_err());
}

#[test]
fn rule_strategies_need_the_rule_expert() {
    let s = setup(true, 1, 4);
    let r = engine::run(&config(&s, StrategyKind::ExpertOcclusion, 1, 1, 0), s.pool.clone(), s.test.clone(), "t");
    assert!(matches!(r, Err(ifa_core::Error::Config(_))));
}
