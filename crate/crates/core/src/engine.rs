//! The interactive optimisation loop: train, query, explain, correct,
//! augment, retrain.
//!
//! [`LoopState`] holds one run's evolving training set and model. It is
//! driven either by [`run`], which answers every query with a simulated
//! [`Expert`], or by the session service, which forwards human corrections.
//! Both paths go through the same [`LoopState::contribution`] and
//! [`LoopState::commit`] calls, so their results agree bit for bit.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::attribution::Attribution;
use crate::augmentation::{self, AugmentedBatch, Correction, Provenance, Sample};
use crate::dataset::{Background, Dataset, Task};
use crate::error::{Error, Result};
use crate::expert::{self, AttributionMethod, Expert, ExpertKind, RuleMode};
use crate::models::{Model, ModelSpec, Predictor};
use crate::rng::{self, stream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrategyKind {
    Baseline,
    Caipi,
    CaipiSingle,
    InteractiveOcclusion,
    InteractiveShap,
    InteractiveSingleOcclusion,
    InteractiveSingleShap,
    ExpertOcclusion,
    ExpertCaipi,
}

/// What a strategy's corrections contain.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Feedback {
    LabelOnly,
    /// Partial attribution map, augmented with occlusion samples.
    Attributions,
    /// Complete attribution, augmented with SHAP samples.
    FullShap,
    IrrelevantSet,
}

impl StrategyKind {
    pub const ALL: [StrategyKind; 9] = [
        StrategyKind::Baseline,
        StrategyKind::Caipi,
        StrategyKind::CaipiSingle,
        StrategyKind::InteractiveOcclusion,
        StrategyKind::InteractiveShap,
        StrategyKind::InteractiveSingleOcclusion,
        StrategyKind::InteractiveSingleShap,
        StrategyKind::ExpertOcclusion,
        StrategyKind::ExpertCaipi,
    ];

    pub fn name(self) -> &'static str {
        match self {
            StrategyKind::Baseline => "baseline",
            StrategyKind::Caipi => "caipi",
            StrategyKind::CaipiSingle => "caipi_single",
            StrategyKind::InteractiveOcclusion => "interactive_occlusion",
            StrategyKind::InteractiveShap => "interactive_shap",
            StrategyKind::InteractiveSingleOcclusion => "interactive_single_occlusion",
            StrategyKind::InteractiveSingleShap => "interactive_single_shap",
            StrategyKind::ExpertOcclusion => "expert_occlusion",
            StrategyKind::ExpertCaipi => "expert_caipi",
        }
    }

    pub fn feedback(self) -> Feedback {
        match self {
            StrategyKind::Baseline => Feedback::LabelOnly,
            StrategyKind::Caipi | StrategyKind::CaipiSingle | StrategyKind::ExpertCaipi => {
                Feedback::IrrelevantSet
            }
            StrategyKind::InteractiveShap => Feedback::FullShap,
            StrategyKind::InteractiveOcclusion
            | StrategyKind::InteractiveSingleOcclusion
            | StrategyKind::InteractiveSingleShap
            | StrategyKind::ExpertOcclusion => Feedback::Attributions,
        }
    }

    /// Strategies driven by the Titanic rule expert.
    pub fn is_rule_based(self) -> bool {
        matches!(self, StrategyKind::ExpertOcclusion | StrategyKind::ExpertCaipi)
    }

    /// Attribution method shown to (and expected from) the expert.
    pub fn explanation_method(self) -> AttributionMethod {
        match self {
            StrategyKind::InteractiveShap | StrategyKind::InteractiveSingleShap => AttributionMethod::Shap,
            _ => AttributionMethod::Occlusion,
        }
    }
}

impl fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for StrategyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown strategy `{s}`")))
    }
}

#[derive(Debug, Clone)]
pub struct LoopConfig {
    pub strategy: StrategyKind,
    pub query_size: usize,
    pub iterations: usize,
    /// SHAP augmentation repetitions; `None` means `M`.
    pub k: Option<usize>,
    pub background: Background,
    pub model: ModelSpec,
    pub expert: Expert,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricEntry {
    pub iteration: usize,
    pub metric: f64,
    pub cumulative_samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub strategy: StrategyKind,
    pub seed: u64,
    pub dataset: String,
    pub metric_series: Vec<f64>,
    pub cumulative_samples: Vec<usize>,
    /// Pool indices queried at each iteration.
    pub queries: Vec<Vec<usize>>,
}

/// Test MSE (regression) or accuracy (classification).
pub fn evaluate<P: Predictor + ?Sized>(model: &P, test: &Dataset) -> Result<f64> {
    if test.n_rows() == 0 {
        return Err(Error::InvalidDataset("empty test set".into()));
    }
    crate::models::check_dims(model.n_features(), test.n_features())?;
    let n = test.n_rows() as f64;
    let rows = test.features().iter().zip(test.targets());
    Ok(match test.task() {
        Task::Regression => rows.map(|(x, &y)| (model.output(x) - y).powi(2)).sum::<f64>() / n,
        Task::Classification => rows.filter(|(x, &y)| model.output(x) == y).count() as f64 / n,
    })
}

/// Initial labelled pool indices: nothing for regression, one random sample
/// of each class for classification (in ascending index order).
pub fn init_labeled<R: rand::Rng + ?Sized>(task: Task, pool: &Dataset, rng: &mut R) -> Result<Vec<usize>> {
    match task {
        Task::Regression => Ok(Vec::new()),
        Task::Classification => {
            let (ones, zeros): (Vec<usize>, Vec<usize>) =
                (0..pool.n_rows()).partition(|&i| pool.targets()[i] == 1.0);
            if ones.is_empty() || zeros.is_empty() {
                return Err(Error::SingleClass);
            }
            let a = zeros[rng.random_range(0..zeros.len())];
            let b = ones[rng.random_range(0..ones.len())];
            Ok(if a < b { vec![a, b] } else { vec![b, a] })
        }
    }
}

/// Removes and returns up to `q` uniformly chosen entries of `remaining`.
pub fn select_query<R: rand::Rng + ?Sized>(remaining: &mut Vec<usize>, q: usize, rng: &mut R) -> Result<Vec<usize>> {
    if remaining.is_empty() {
        return Err(Error::InvalidArgument("query pool is exhausted".into()));
    }
    let take = q.min(remaining.len());
    let mut positions = index::sample(rng, remaining.len(), take).into_vec();
    let chosen: Vec<usize> = positions.iter().map(|&p| remaining[p]).collect();
    positions.sort_unstable_by(|a, b| b.cmp(a));
    for p in positions {
        remaining.remove(p);
    }
    Ok(chosen)
}

/// Builds the strategy's augmented batch for one corrected sample.
///
/// A label-only correction always degenerates to plain oversampling.
#[allow(clippy::too_many_arguments)]
pub fn augment_for_strategy<R: rand::Rng + ?Sized>(
    strategy: StrategyKind,
    x: &[f64],
    y: f64,
    corr: &Correction,
    b: &Background,
    task: Task,
    k: usize,
    rng: &mut R,
) -> Result<AugmentedBatch> {
    let m = x.len();
    if corr.is_label_only() {
        return Ok(augmentation::augment_baseline(x, y, m));
    }
    match strategy.feedback() {
        Feedback::LabelOnly => Err(Error::InvalidCorrection(format!(
            "{strategy} accepts label corrections only"
        ))),
        Feedback::IrrelevantSet => {
            if !corr.attributions.is_empty() {
                return Err(Error::InvalidCorrection(format!(
                    "{strategy} expects an irrelevant feature set"
                )));
            }
            let set = corr.irrelevant_set.clone().unwrap_or_default();
            augmentation::augment_caipi(x, y, &set, b, m)
        }
        Feedback::Attributions => {
            if corr.irrelevant_set.as_ref().is_some_and(|s| !s.is_empty()) {
                return Err(Error::InvalidCorrection(format!("{strategy} expects attributions")));
            }
            augmentation::augment_occlusion(x, y, corr, b, task)
        }
        Feedback::FullShap => {
            let r = Attribution::from_map(m, &corr.attributions)?;
            augmentation::augment_shap(x, y, &r, b, k, rng, task)
        }
    }
}

/// What the simulated expert answers for a queried sample under `strategy`.
pub fn simulated_correction<R: rand::Rng + ?Sized>(
    strategy: StrategyKind,
    expert: &Expert,
    x: &[f64],
    recorded: f64,
    b: &Background,
    rng: &mut R,
) -> Result<Correction> {
    let y = expert.oracle_label(x, Some(recorded))?;
    if strategy.is_rule_based() {
        if expert.kind != ExpertKind::TitanicRules {
            return Err(Error::Config(format!("{strategy} needs the titanic_rules expert")));
        }
        let mode = match strategy {
            StrategyKind::ExpertOcclusion => RuleMode::Occlusion,
            _ => RuleMode::Caipi,
        };
        return expert::titanic_rules(x, y, mode);
    }
    if strategy == StrategyKind::Baseline {
        return Ok(Correction::label_only(y));
    }
    let explain = |method: AttributionMethod, rng: &mut R| {
        let e = Expert {
            attribution_method: method,
            ..expert.clone()
        };
        e.oracle_explanation(x, b, rng)
    };
    Ok(match strategy {
        StrategyKind::Caipi => {
            let r = explain(expert.attribution_method, rng)?;
            let zeros: BTreeSet<usize> = r.iter_available().filter(|&(_, v)| v == 0.0).map(|(i, _)| i).collect();
            Correction::with_irrelevant(y, zeros)
        }
        StrategyKind::CaipiSingle => {
            let r = explain(expert.attribution_method, rng)?;
            let u = expert::least_important_feature(&r)?;
            Correction::with_irrelevant(y, BTreeSet::from([u]))
        }
        StrategyKind::InteractiveOcclusion | StrategyKind::InteractiveShap => {
            Correction::with_attributions(y, explain(strategy.explanation_method(), rng)?.to_map())
        }
        StrategyKind::InteractiveSingleOcclusion | StrategyKind::InteractiveSingleShap => {
            let r = explain(strategy.explanation_method(), rng)?;
            let u = expert::least_important_feature(&r)?;
            Correction::with_attributions(y, BTreeMap::from([(u, r.values[u])]))
        }
        StrategyKind::Baseline | StrategyKind::ExpertOcclusion | StrategyKind::ExpertCaipi => unreachable!(),
    })
}

/// One run's training set, model and metric history.
#[derive(Debug, Clone)]
pub struct LoopState {
    strategy: StrategyKind,
    query_size: usize,
    k: usize,
    background: Background,
    model_spec: ModelSpec,
    seed: u64,
    pool: Dataset,
    test: Dataset,
    remaining: Vec<usize>,
    query_rng: rng::Rng,
    train: Vec<Sample>,
    model: Model,
    iteration: usize,
    history: Vec<MetricEntry>,
    queries: Vec<Vec<usize>>,
}

impl LoopState {
    /// Picks the initial labelled samples, trains on them (or starts from
    /// the untrained zero model) and records the iteration-0 metric.
    #[allow(clippy::too_many_arguments)]
    pub fn start(
        strategy: StrategyKind,
        query_size: usize,
        k: Option<usize>,
        background: Background,
        model_spec: ModelSpec,
        seed: u64,
        pool: Dataset,
        test: Dataset,
    ) -> Result<Self> {
        let m = pool.n_features();
        if query_size == 0 {
            return Err(Error::Config("query_size must be at least 1".into()));
        }
        if k == Some(0) {
            return Err(Error::Config("k must be at least 1".into()));
        }
        if test.n_features() != m || test.task() != pool.task() {
            return Err(Error::InvalidDataset("pool and test sets disagree".into()));
        }
        background.check(m)?;
        model_spec.validate()?;
        let task = pool.task();
        let initial = init_labeled(task, &pool, &mut rng::rng_from(seed, &[stream::INIT]))?;
        let train: Vec<Sample> = initial
            .iter()
            .map(|&i| Sample {
                features: pool.row(i).to_vec(),
                target: pool.targets()[i],
                provenance: Provenance::Original,
            })
            .collect();
        let remaining = (0..pool.n_rows()).filter(|i| !initial.contains(i)).collect();
        let model = Self::train_model(&model_spec, &pool, &train)?;
        let mut state = Self {
            strategy,
            query_size,
            k: k.unwrap_or(m),
            background,
            model_spec,
            seed,
            pool,
            test,
            remaining,
            query_rng: rng::rng_from(seed, &[stream::QUERY]),
            train,
            model,
            iteration: 0,
            history: Vec::new(),
            queries: Vec::new(),
        };
        state.record()?;
        Ok(state)
    }

    fn train_model(spec: &ModelSpec, layout: &Dataset, train: &[Sample]) -> Result<Model> {
        if train.is_empty() {
            return Ok(Model::untrained(spec, layout.task(), layout.n_features()));
        }
        let data = layout.with_rows(
            train.iter().map(|s| s.features.clone()).collect(),
            train.iter().map(|s| s.target).collect(),
        )?;
        Model::fit(spec, &data)
    }

    fn record(&mut self) -> Result<()> {
        let metric = evaluate(&self.model, &self.test)?;
        self.history.push(MetricEntry {
            iteration: self.iteration,
            metric,
            cumulative_samples: self.train.len(),
        });
        Ok(())
    }

    /// Draws the next query (pool indices).
    pub fn draw_query(&mut self) -> Result<Vec<usize>> {
        let q = select_query(&mut self.remaining, self.query_size, &mut self.query_rng)?;
        self.queries.push(q.clone());
        Ok(q)
    }

    /// Deterministic rng for the `slot`-th sample of the current query.
    pub fn slot_rng(&self, purpose: u64, slot: usize) -> rng::Rng {
        rng::rng_from(self.seed, &[purpose, self.iteration as u64, slot as u64])
    }

    /// Training samples contributed by one corrected query sample: the
    /// labelled original followed by the strategy's augmented batch.
    pub fn contribution(&self, pool_index: usize, slot: usize, corr: &Correction) -> Result<Vec<Sample>> {
        let x = self.pool.row(pool_index);
        let y = corr
            .label
            .ok_or_else(|| Error::InvalidCorrection("missing label".into()))?;
        match self.strategy.explanation_method() {
            AttributionMethod::Shap => corr.validate_shapley(self.task(), x.len())?,
            AttributionMethod::Occlusion => corr.validate(self.task(), x.len())?,
        }
        let mut rng = self.slot_rng(stream::SHAP_AUGMENT, slot);
        let batch = augment_for_strategy(
            self.strategy,
            x,
            y,
            corr,
            &self.background,
            self.task(),
            self.k,
            &mut rng,
        )?;
        let mut out = Vec::with_capacity(batch.len() + 1);
        out.push(Sample {
            features: x.to_vec(),
            target: y,
            provenance: Provenance::Original,
        });
        out.extend(batch.samples);
        Ok(out)
    }

    /// Appends contributions (in query order), retrains from scratch and
    /// records the metric.
    pub fn commit(&mut self, contributions: Vec<Vec<Sample>>) -> Result<MetricEntry> {
        for c in contributions {
            self.train.extend(c);
        }
        self.model = Self::train_model(&self.model_spec, &self.pool, &self.train)?;
        self.iteration += 1;
        self.record()?;
        Ok(*self.history.last().expect("history is never empty"))
    }

    pub fn task(&self) -> Task {
        self.pool.task()
    }

    pub fn strategy(&self) -> StrategyKind {
        self.strategy
    }

    pub fn model(&self) -> &Model {
        &self.model
    }

    pub fn pool(&self) -> &Dataset {
        &self.pool
    }

    pub fn test(&self) -> &Dataset {
        &self.test
    }

    pub fn background(&self) -> &Background {
        &self.background
    }

    pub fn model_spec(&self) -> &ModelSpec {
        &self.model_spec
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    pub fn history(&self) -> &[MetricEntry] {
        &self.history
    }

    pub fn training_set(&self) -> &[Sample] {
        &self.train
    }

    pub fn remaining(&self) -> usize {
        self.remaining.len()
    }

    pub fn queries(&self) -> &[Vec<usize>] {
        &self.queries
    }

    pub fn into_result(self, dataset: &str) -> RunResult {
        RunResult {
            strategy: self.strategy,
            seed: self.seed,
            dataset: dataset.to_string(),
            metric_series: self.history.iter().map(|e| e.metric).collect(),
            cumulative_samples: self.history.iter().map(|e| e.cumulative_samples).collect(),
            queries: self.queries,
        }
    }
}

/// Runs the loop with a simulated expert, returning the final state.
pub fn run_state(config: &LoopConfig, pool: Dataset, test: Dataset) -> Result<LoopState> {
    let mut state = LoopState::start(
        config.strategy,
        config.query_size,
        config.k,
        config.background.clone(),
        config.model.clone(),
        config.seed,
        pool,
        test,
    )?;
    for _ in 0..config.iterations {
        let query = state.draw_query()?;
        let contributions = query
            .iter()
            .enumerate()
            .map(|(slot, &i)| {
                let x = state.pool().row(i);
                let recorded = state.pool().targets()[i];
                let mut rng = state.slot_rng(stream::SHAP_ORACLE, slot);
                let corr = simulated_correction(config.strategy, &config.expert, x, recorded, state.background(), &mut rng)?;
                state.contribution(i, slot, &corr)
            })
            .collect::<Result<Vec<_>>>()?;
        state.commit(contributions)?;
    }
    Ok(state)
}

pub fn run(config: &LoopConfig, pool: Dataset, test: Dataset, dataset: &str) -> Result<RunResult> {
    Ok(run_state(config, pool, test)?.into_result(dataset))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategySummary {
    pub strategy: StrategyKind,
    pub mean_series: Vec<f64>,
    /// Per-seed `metric - baseline metric`, when baseline runs exist.
    pub diffs: Vec<(u64, Vec<f64>)>,
    pub mean_diff: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AggregateResult {
    pub strategies: Vec<StrategySummary>,
    pub runs: Vec<RunResult>,
}

impl AggregateResult {
    pub fn strategy(&self, kind: StrategyKind) -> Option<&StrategySummary> {
        self.strategies.iter().find(|s| s.strategy == kind)
    }
}

fn mean_series(series: &[&[f64]]) -> Vec<f64> {
    let len = series[0].len();
    let n = series.len() as f64;
    (0..len)
        .map(|t| series.iter().map(|s| s[t]).sum::<f64>() / n)
        .collect()
}

/// Mean series per strategy and paired differences against the baseline
/// run with the same seed.
pub fn aggregate(runs: Vec<RunResult>) -> Result<AggregateResult> {
    if runs.is_empty() {
        return Err(Error::InvalidArgument("no runs to aggregate".into()));
    }
    let len = runs[0].metric_series.len();
    if runs.iter().any(|r| r.metric_series.len() != len) {
        return Err(Error::InvalidArgument("runs have different series lengths".into()));
    }
    let mut runs = runs;
    runs.sort_by_key(|r| (r.strategy, r.seed));
    let baseline: BTreeMap<u64, &RunResult> = runs
        .iter()
        .filter(|r| r.strategy == StrategyKind::Baseline)
        .map(|r| (r.seed, r))
        .collect();
    let kinds: BTreeSet<StrategyKind> = runs.iter().map(|r| r.strategy).collect();
    let mut strategies = Vec::new();
    for kind in kinds {
        let mine: Vec<&RunResult> = runs.iter().filter(|r| r.strategy == kind).collect();
        let series: Vec<&[f64]> = mine.iter().map(|r| r.metric_series.as_slice()).collect();
        let mut diffs = Vec::new();
        if !baseline.is_empty() {
            for r in &mine {
                let base = baseline.get(&r.seed).ok_or_else(|| {
                    Error::InvalidArgument(format!("no baseline run for seed {}", r.seed))
                })?;
                let d: Vec<f64> = r
                    .metric_series
                    .iter()
                    .zip(&base.metric_series)
                    .map(|(a, b)| a - b)
                    .collect();
                diffs.push((r.seed, d));
            }
        }
        let mean_diff = (!diffs.is_empty()).then(|| {
            let d: Vec<&[f64]> = diffs.iter().map(|(_, d)| d.as_slice()).collect();
            mean_series(&d)
        });
        strategies.push(StrategySummary {
            strategy: kind,
            mean_series: mean_series(&series),
            diffs,
            mean_diff,
        });
    }
    Ok(AggregateResult { strategies, runs })
}
