//! One correction session: a [`LoopState`] plus the pending query.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use ifa_core::attribution::{self, Attribution};
use ifa_core::augmentation::{Correction, Sample};
use ifa_core::dataset::Task;
use ifa_core::engine::{LoopState, MetricEntry, StrategyKind};
use ifa_core::experiment::Experiment;
use ifa_core::expert::AttributionMethod;
use ifa_core::models::{ModelSpec, Predictor};
use ifa_core::rng::stream;

use crate::error::ServiceError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CreateSession {
    pub strategy: StrategyKind,
    #[serde(default)]
    pub model_index: usize,
    #[serde(default)]
    pub shuffle_index: usize,
    /// Defaults to the served config's query size.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub query_size: Option<usize>,
    /// Defaults to the served config's model.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<ModelSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    /// Attribution method shown with each query; defaults to the strategy's.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub method: Option<AttributionMethod>,
    /// When true, a correction without a label takes the recorded label.
    #[serde(default = "yes")]
    pub labels_known: bool,
}

fn yes() -> bool {
    true
}

impl CreateSession {
    pub fn new(strategy: StrategyKind) -> Self {
        Self {
            strategy,
            model_index: 0,
            shuffle_index: 0,
            query_size: None,
            model: None,
            k: None,
            method: None,
            labels_known: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleStatus {
    Pending,
    /// Correction stored but no label given yet.
    AwaitingLabel,
    Corrected,
    Skipped,
}

#[derive(Debug, Clone)]
struct PendingSample {
    sample_id: usize,
    slot: usize,
    prediction: f64,
    attribution: Attribution,
    status: SampleStatus,
    contribution: Vec<Sample>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuerySample {
    pub sample_id: usize,
    pub features: Vec<f64>,
    pub prediction: f64,
    pub attribution: Attribution,
    pub status: SampleStatus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryView {
    pub id: String,
    pub strategy: StrategyKind,
    pub task: Task,
    pub method: AttributionMethod,
    pub iteration: usize,
    pub feature_names: Vec<String>,
    pub background: Vec<f64>,
    pub pending: Vec<QuerySample>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrectionAck {
    pub sample_id: usize,
    pub status: SampleStatus,
    /// Training samples this correction adds at the next retrain.
    pub n_samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsView {
    pub id: String,
    pub history: Vec<MetricEntry>,
}

#[derive(Debug, Clone)]
pub struct Session {
    id: String,
    method: AttributionMethod,
    labels_known: bool,
    n_perms: Option<usize>,
    state: LoopState,
    pending: Vec<PendingSample>,
}

impl Session {
    pub fn create(id: String, experiment: &Experiment, req: &CreateSession) -> Result<Self, ServiceError> {
        let cfg = experiment.config();
        let e = &cfg.experiment;
        if req.model_index >= e.n_models || req.shuffle_index >= e.n_shuffles {
            return Err(ServiceError::BadRequest(format!(
                "scenario ({}, {}) outside {} models x {} shuffles",
                req.model_index, req.shuffle_index, e.n_models, e.n_shuffles
            )));
        }
        let scenario = experiment.scenario(req.model_index, req.shuffle_index)?;
        let (pool, test) = scenario.view(req.strategy, experiment.baseline_labels());
        let model = match &req.model {
            Some(spec) => spec.clone(),
            None => cfg.model_spec()?,
        };
        let state = LoopState::start(
            req.strategy,
            req.query_size.unwrap_or(e.query_size),
            req.k.or(e.k),
            scenario.background.clone(),
            model,
            scenario.seed,
            pool.clone(),
            test.clone(),
        )?;
        let mut session = Self {
            id,
            method: req.method.unwrap_or(req.strategy.explanation_method()),
            labels_known: req.labels_known,
            n_perms: e.n_perms,
            state,
            pending: Vec::new(),
        };
        session.draw()?;
        Ok(session)
    }

    /// Draws the next query and explains it with the current model. An
    /// exhausted pool leaves the query empty.
    fn draw(&mut self) -> Result<(), ServiceError> {
        self.pending.clear();
        if self.state.remaining() == 0 {
            return Ok(());
        }
        let query = self.state.draw_query()?;
        let model = self.state.model();
        let b = self.state.background();
        for (slot, &i) in query.iter().enumerate() {
            let x = self.state.pool().row(i);
            let attribution = match self.method {
                AttributionMethod::Occlusion => attribution::occlusion(model, x, b)?,
                AttributionMethod::Shap if x.len() <= attribution::EXACT_FEATURE_LIMIT => {
                    attribution::shap_exact(model, x, b)?
                }
                AttributionMethod::Shap => {
                    let n = self.n_perms.unwrap_or_else(|| attribution::default_permutations(x.len()));
                    let mut rng = self.state.slot_rng(stream::SHAP_DISPLAY, slot);
                    attribution::shap_permutation(model, x, b, n, &mut rng)?
                }
            };
            self.pending.push(PendingSample {
                sample_id: i,
                slot,
                prediction: model.output(x),
                attribution,
                status: SampleStatus::Pending,
                contribution: Vec::new(),
            });
        }
        Ok(())
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn state(&self) -> &LoopState {
        &self.state
    }

    pub fn query(&self) -> QueryView {
        let pool = self.state.pool();
        QueryView {
            id: self.id.clone(),
            strategy: self.state.strategy(),
            task: self.state.task(),
            method: self.method,
            iteration: self.state.iteration(),
            feature_names: pool.feature_names().to_vec(),
            background: self.state.background().values.clone(),
            pending: self
                .pending
                .iter()
                .filter(|p| matches!(p.status, SampleStatus::Pending | SampleStatus::AwaitingLabel))
                .map(|p| QuerySample {
                    sample_id: p.sample_id,
                    features: pool.row(p.sample_id).to_vec(),
                    prediction: p.prediction,
                    attribution: p.attribution.clone(),
                    status: p.status,
                })
                .collect(),
        }
    }

    fn check_values(&self, corr: &Correction) -> Result<(), ServiceError> {
        let m = self.state.pool().n_features();
        let task = self.state.task();
        match self.state.strategy().explanation_method() {
            AttributionMethod::Shap => corr.validate_shapley(task, m)?,
            AttributionMethod::Occlusion => corr.validate(task, m)?,
        }
        Ok(())
    }

    /// Stores a correction and computes its augmentation.
    pub fn submit(&mut self, sample_id: usize, mut corr: Correction) -> Result<CorrectionAck, ServiceError> {
        let pos = self
            .pending
            .iter()
            .position(|p| p.sample_id == sample_id)
            .ok_or_else(|| ServiceError::NotFound(format!("sample {sample_id} is not in the pending query")))?;
        let status = self.pending[pos].status;
        let allowed = status == SampleStatus::Pending
            || (status == SampleStatus::AwaitingLabel && corr.label.is_some());
        if !allowed {
            return Err(ServiceError::Conflict(format!("sample {sample_id} was already submitted")));
        }
        if corr.label.is_none() && self.labels_known {
            corr.label = Some(self.state.pool().targets()[sample_id]);
        }
        self.check_values(&corr)?;
        let p = &mut self.pending[pos];
        if corr.label.is_none() {
            p.status = SampleStatus::AwaitingLabel;
            p.contribution.clear();
        } else {
            p.contribution = self.state.contribution(sample_id, p.slot, &corr)?;
            p.status = SampleStatus::Corrected;
        }
        Ok(CorrectionAck {
            sample_id,
            status: p.status,
            n_samples: p.contribution.len(),
        })
    }

    /// Retrains on all corrections, then draws the next query.
    pub fn retrain(&mut self, skip: &BTreeSet<usize>) -> Result<MetricEntry, ServiceError> {
        if self.pending.is_empty() {
            return Err(ServiceError::Conflict("no pending query to retrain on".into()));
        }
        if let Some(id) = skip.iter().find(|id| !self.pending.iter().any(|p| p.sample_id == **id)) {
            return Err(ServiceError::NotFound(format!("sample {id} is not in the pending query")));
        }
        let open: Vec<usize> = self
            .pending
            .iter()
            .filter(|p| p.status != SampleStatus::Corrected && !skip.contains(&p.sample_id))
            .map(|p| p.sample_id)
            .collect();
        if !open.is_empty() {
            return Err(ServiceError::Conflict(format!("samples {open:?} still need a labelled correction")));
        }
        let contributions = self
            .pending
            .iter_mut()
            .map(|p| {
                if skip.contains(&p.sample_id) {
                    p.status = SampleStatus::Skipped;
                    Vec::new()
                } else {
                    std::mem::take(&mut p.contribution)
                }
            })
            .collect();
        let entry = self.state.commit(contributions)?;
        self.draw()?;
        Ok(entry)
    }

    pub fn metrics(&self) -> MetricsView {
        MetricsView {
            id: self.id.clone(),
            history: self.state.history().to_vec(),
        }
    }
}
