//! Scenarios and experiment matrices built from an [`ExperimentConfig`].
//!
//! A scenario is one (generating model, shuffle) pair: a query pool, a test
//! set, an oracle model and a background. Every strategy runs on the same
//! scenario with the same run seed, which pairs the runs.

use std::sync::Arc;

use rayon::prelude::*;

use crate::config::{DatasetSpec, ExperimentConfig, LabelSource, Schema};
use crate::dataset::{self, Background, Dataset, LinearGroundTruth};
use crate::engine::{self, AggregateResult, LoopConfig, RunResult, StrategyKind};
use crate::error::{Error, Result};
use crate::expert::Expert;
use crate::models::Model;
use crate::rng::{self, stream};

#[derive(Debug, Clone)]
pub struct Scenario {
    pub model_index: usize,
    pub shuffle_index: usize,
    /// Seed shared by all strategies run on this scenario.
    pub seed: u64,
    pub oracle: Arc<Model>,
    pub ground_truth: Option<LinearGroundTruth>,
    pub background: Background,
    /// Pool and test set labelled by the oracle.
    pub oracle_pool: Dataset,
    pub oracle_test: Dataset,
    /// Pool and test set with the recorded labels.
    pub recorded_pool: Dataset,
    pub recorded_test: Dataset,
}

impl Scenario {
    /// Pool and test set a strategy learns from and is scored on.
    pub fn view(&self, strategy: StrategyKind, baseline_labels: LabelSource) -> (&Dataset, &Dataset) {
        let recorded = strategy.is_rule_based()
            || (strategy == StrategyKind::Baseline && baseline_labels == LabelSource::Recorded);
        if recorded {
            (&self.recorded_pool, &self.recorded_test)
        } else {
            (&self.oracle_pool, &self.oracle_test)
        }
    }
}

/// Seed of the run on generating model `model_index` and shuffle
/// `shuffle_index`.
pub fn run_seed(base: u64, model_index: usize, shuffle_index: usize) -> u64 {
    rng::derive_seed(base, &[model_index as u64, shuffle_index as u64])
}

/// Loaded data and oracle for a validated config.
#[derive(Debug, Clone)]
pub struct Experiment {
    config: ExperimentConfig,
    csv: Option<(Dataset, Arc<Model>)>,
}

impl Experiment {
    pub fn new(config: ExperimentConfig) -> Result<Self> {
        config.validate()?;
        let csv = match &config.dataset {
            DatasetSpec::Csv { path, schema, .. } => {
                let schema = Schema::load(schema)?;
                let full = dataset::load_csv(path, &schema.target, &schema.feature_refs(), schema.task)?;
                let spec = config.oracle_spec()?.expect("validated csv config has an oracle");
                let oracle = Model::fit(&spec, &full)?;
                Some((full, Arc::new(oracle)))
            }
            _ => None,
        };
        if let Some(b) = &config.experiment.background {
            let m = match (&config.dataset, &csv) {
                (DatasetSpec::Linear { features, .. } | DatasetSpec::Logistic { features, .. }, _) => *features,
                (_, Some((full, _))) => full.n_features(),
                _ => unreachable!(),
            };
            Background::new(b.clone()).check(m)?;
        }
        Ok(Self { config, csv })
    }

    pub fn config(&self) -> &ExperimentConfig {
        &self.config
    }

    pub fn baseline_labels(&self) -> LabelSource {
        match self.config.dataset {
            DatasetSpec::Csv { baseline_labels, .. } => baseline_labels,
            _ => LabelSource::Oracle,
        }
    }

    pub fn scenario(&self, model_index: usize, shuffle_index: usize) -> Result<Scenario> {
        let base = self.config.experiment.seed;
        let seed = run_seed(base, model_index, shuffle_index);
        let override_bg = self.config.experiment.background.clone().map(Background::new);
        match (&self.config.dataset, &self.csv) {
            (DatasetSpec::Linear { n_train, n_test, features }, _)
            | (DatasetSpec::Logistic { n_train, n_test, features }, _) => {
                let data_seed = rng::derive_seed(base, &[stream::DATA, model_index as u64]);
                let (pool, test, gt) = match self.config.dataset {
                    DatasetSpec::Linear { .. } => dataset::generate_linear(data_seed, *n_train, *n_test, *features)?,
                    _ => dataset::generate_logistic(data_seed, *n_train, *n_test, *features)?,
                };
                let background = match override_bg {
                    Some(b) => b,
                    None => dataset::compute_background(&pool.concat(&test)?),
                };
                Ok(Scenario {
                    model_index,
                    shuffle_index,
                    seed,
                    oracle: Arc::new(Model::from_ground_truth(&gt)),
                    ground_truth: Some(gt),
                    background,
                    oracle_pool: pool.clone(),
                    oracle_test: test.clone(),
                    recorded_pool: pool,
                    recorded_test: test,
                })
            }
            (DatasetSpec::Csv { test_fraction, .. }, Some((full, oracle))) => {
                let split_seed = rng::derive_seed(base, &[stream::SHUFFLE, shuffle_index as u64]);
                let (pool, test) = dataset::split_shuffle(full, split_seed, *test_fraction)?;
                let relabel = |d: &Dataset| d.with_targets(oracle.predict_batch(d.features())?);
                let background = override_bg.unwrap_or_else(|| dataset::compute_background(full));
                Ok(Scenario {
                    model_index,
                    shuffle_index,
                    seed,
                    oracle: Arc::clone(oracle),
                    ground_truth: None,
                    background,
                    oracle_pool: relabel(&pool)?,
                    oracle_test: relabel(&test)?,
                    recorded_pool: pool,
                    recorded_test: test,
                })
            }
            (DatasetSpec::Csv { .. }, None) => unreachable!("csv data is loaded in Experiment::new"),
        }
    }

    /// The simulated expert answering `strategy`'s queries.
    pub fn expert(&self, scenario: &Scenario, strategy: StrategyKind) -> Expert {
        let recorded = strategy.is_rule_based()
            || (strategy == StrategyKind::Baseline && self.baseline_labels() == LabelSource::Recorded);
        let mut expert = if recorded {
            Expert::titanic_rules()
        } else {
            Expert::ground_truth(Arc::clone(&scenario.oracle), self.config.experiment.caipi_method)
        };
        expert.n_perms = self.config.experiment.n_perms;
        expert
    }

    pub fn loop_config(&self, scenario: &Scenario, strategy: StrategyKind) -> Result<LoopConfig> {
        let e = &self.config.experiment;
        Ok(LoopConfig {
            strategy,
            query_size: e.query_size,
            iterations: e.iterations,
            k: e.k,
            background: scenario.background.clone(),
            model: self.config.model_spec()?,
            expert: self.expert(scenario, strategy),
            seed: scenario.seed,
        })
    }

    pub fn run_one(&self, scenario: &Scenario, strategy: StrategyKind) -> Result<RunResult> {
        let cfg = self.loop_config(scenario, strategy)?;
        let (pool, test) = scenario.view(strategy, self.baseline_labels());
        engine::run(&cfg, pool.clone(), test.clone(), &self.config.experiment.name)
    }

    /// All scenarios, model-major.
    pub fn scenarios(&self) -> Result<Vec<Scenario>> {
        let e = &self.config.experiment;
        (0..e.n_models)
            .flat_map(|j| (0..e.n_shuffles).map(move |s| (j, s)))
            .collect::<Vec<_>>()
            .into_par_iter()
            .map(|(j, s)| self.scenario(j, s))
            .collect()
    }

    /// Every (scenario, strategy) run, in scenario then strategy order.
    pub fn run_all(&self) -> Result<Vec<RunResult>> {
        let scenarios = self.scenarios()?;
        let jobs: Vec<(&Scenario, StrategyKind)> = scenarios
            .iter()
            .flat_map(|sc| self.config.experiment.strategies.iter().map(move |&k| (sc, k)))
            .collect();
        jobs.into_par_iter()
            .map(|(sc, k)| self.run_one(sc, k))
            .collect()
    }
}

/// Runs the full matrix on at most `jobs` threads (0 = all cores) and
/// aggregates it.
pub fn run_matrix(config: ExperimentConfig, jobs: usize) -> Result<AggregateResult> {
    let runs = with_jobs(jobs, || Experiment::new(config)?.run_all())?;
    engine::aggregate(runs)
}

/// Runs `f` on a dedicated rayon pool of `jobs` threads (0 = default size).
pub fn with_jobs<T: Send>(jobs: usize, f: impl FnOnce() -> Result<T> + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
    pool.install(f)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(strategies: &str, iterations: usize) -> ExperimentConfig {
        ExperimentConfig::from_toml_str(&format!(
            r#"
[experiment]
name = "t"
strategies = {strategies}
query_size = 1
iterations = {iterations}
n_models = 2
n_shuffles = 2

[dataset]
kind = "linear"
n_train = 30
n_test = 20
features = 3

[model]
kind = "linear_regression"
"#
        ))
        .unwrap()
    }

    #[test]
    fn scenarios_are_deterministic_and_distinct() {
        let exp = Experiment::new(config(r#"["baseline"]"#, 2)).unwrap();
        let a = exp.scenario(0, 0).unwrap();
        let b = exp.scenario(0, 0).unwrap();
        assert_eq!(a.oracle_pool, b.oracle_pool);
        assert_eq!(a.seed, b.seed);
        let c = exp.scenario(1, 0).unwrap();
        assert_ne!(a.oracle_pool, c.oracle_pool);
        let d = exp.scenario(0, 1).unwrap();
        assert_eq!(a.oracle_pool, d.oracle_pool);
        assert_ne!(a.seed, d.seed);
    }

    #[test]
    fn matrix_runs_every_pair() {
        let agg = run_matrix(config(r#"["baseline", "interactive_occlusion"]"#, 3), 2).unwrap();
        assert_eq!(agg.runs.len(), 8);
        for s in &agg.strategies {
            assert_eq!(s.mean_series.len(), 4);
        }
        let io = agg.strategy(StrategyKind::InteractiveOcclusion).unwrap();
        assert!(io.mean_series[1] < 1e-8);
    }

    #[test]
    fn rule_strategies_see_recorded_labels() {
        let exp = Experiment::new(config(r#"["baseline"]"#, 1)).unwrap();
        let sc = exp.scenario(0, 0).unwrap();
        assert_eq!(
            exp.expert(&sc, StrategyKind::ExpertOcclusion).kind,
            crate::expert::ExpertKind::TitanicRules
        );
        assert_eq!(
            exp.expert(&sc, StrategyKind::Baseline).kind,
            crate::expert::ExpertKind::GroundTruthModel
        );
    }
}
