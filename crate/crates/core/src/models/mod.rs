//! A small from-scratch model zoo behind one fit/predict contract.
//!
//! Everything downstream (attributions, augmentation, the interactive loop)
//! only sees the [`Predictor`] trait, so any model here, or any closure
//! wrapped in [`FnModel`], can be explained and corrected.
//!
//! Classification models always predict hard labels in `{0, 1}`; a decision
//! score exactly on the boundary maps to class 1.

mod linear;
mod logistic;
mod mlp;
mod svm;
mod trees;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, LinearGroundTruth, Task};
use crate::error::{Error, Result};

pub use trees::{Forest, Tree};

/// Anything that maps a feature vector to a real output.
pub trait Predictor: Sync {
    fn n_features(&self) -> usize;

    fn task(&self) -> Task;

    /// Output for `x`. Callers guarantee `x.len() == self.n_features()`.
    fn output(&self, x: &[f64]) -> f64;
}

impl<P: Predictor + ?Sized> Predictor for &P {
    fn n_features(&self) -> usize {
        (**self).n_features()
    }

    fn task(&self) -> Task {
        (**self).task()
    }

    fn output(&self, x: &[f64]) -> f64 {
        (**self).output(x)
    }
}

/// Adapts a plain function into a [`Predictor`].
pub struct FnModel<F> {
    m: usize,
    task: Task,
    f: F,
}

impl<F: Fn(&[f64]) -> f64 + Sync> FnModel<F> {
    pub fn new(m: usize, task: Task, f: F) -> Self {
        Self { m, task, f }
    }
}

impl<F: Fn(&[f64]) -> f64 + Sync> Predictor for FnModel<F> {
    fn n_features(&self) -> usize {
        self.m
    }

    fn task(&self) -> Task {
        self.task
    }

    fn output(&self, x: &[f64]) -> f64 {
        (self.f)(x)
    }
}

pub(crate) fn check_dims(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::DimensionMismatch { expected, got });
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    LinearRegression,
    LogisticRegression,
    BoostedTrees,
    Mlp,
    KernelSvm,
}

impl ModelKind {
    pub const ALL: [ModelKind; 5] = [
        ModelKind::LinearRegression,
        ModelKind::LogisticRegression,
        ModelKind::BoostedTrees,
        ModelKind::Mlp,
        ModelKind::KernelSvm,
    ];

    /// Allowed hyperparameters with their defaults.
    fn defaults(self) -> &'static [(&'static str, f64)] {
        match self {
            ModelKind::LinearRegression => &[("ridge_fallback", 1e-10)],
            ModelKind::LogisticRegression => {
                &[("epochs", 1000.0), ("learning_rate", 0.1), ("l2", 1e-4)]
            }
            ModelKind::BoostedTrees => &[
                ("n_trees", 10.0),
                ("max_depth", 3.0),
                ("learning_rate", 0.1),
                ("min_samples_leaf", 1.0),
            ],
            ModelKind::Mlp => &[("hidden", 9.0), ("epochs", 100.0), ("learning_rate", 0.01)],
            ModelKind::KernelSvm => &[("epochs", 200.0), ("gamma", 0.0)],
        }
    }
}

fn is_count_key(key: &str) -> bool {
    matches!(
        key,
        "epochs" | "n_trees" | "max_depth" | "min_samples_leaf" | "hidden"
    )
}

/// Model family, hyperparameter overrides and seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub kind: ModelKind,
    #[serde(default)]
    pub hyperparameters: BTreeMap<String, f64>,
    #[serde(default)]
    pub seed: u64,
}

impl ModelSpec {
    pub fn new(kind: ModelKind, hyperparameters: BTreeMap<String, f64>, seed: u64) -> Result<Self> {
        let spec = Self {
            kind,
            hyperparameters,
            seed,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Spec with all defaults.
    pub fn default_for(kind: ModelKind) -> Self {
        Self {
            kind,
            hyperparameters: BTreeMap::new(),
            seed: 0,
        }
    }

    pub fn with(mut self, key: &str, value: f64) -> Result<Self> {
        self.hyperparameters.insert(key.to_string(), value);
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        let defaults = self.kind.defaults();
        for (key, &value) in &self.hyperparameters {
            if !defaults.iter().any(|(k, _)| k == key) {
                return Err(Error::InvalidArgument(format!(
                    "unknown hyperparameter `{key}` for {:?}",
                    self.kind
                )));
            }
            let ok = if is_count_key(key) {
                value >= 1.0 && value.fract() == 0.0
            } else if key == "learning_rate" {
                value > 0.0
            } else {
                value >= 0.0 && value.is_finite()
            };
            if !ok {
                return Err(Error::InvalidArgument(format!(
                    "hyperparameter `{key}` has invalid value {value}"
                )));
            }
        }
        Ok(())
    }

    pub fn get(&self, key: &str) -> f64 {
        self.hyperparameters.get(key).copied().unwrap_or_else(|| {
            self.kind
                .defaults()
                .iter()
                .find(|(k, _)| *k == key)
                .map(|&(_, v)| v)
                .expect("hyperparameter key belongs to the model kind")
        })
    }

    pub fn count(&self, key: &str) -> usize {
        self.get(key) as usize
    }
}

#[derive(Debug, Clone)]
enum State {
    Constant(f64),
    Linear(linear::Linear),
    Logistic(logistic::Logistic),
    Trees(trees::Forest),
    Mlp(mlp::Mlp),
    Svm(svm::Svm),
}

/// A trained, immutable predictor.
#[derive(Debug, Clone)]
pub struct Model {
    spec: ModelSpec,
    task: Task,
    m: usize,
    state: State,
}

impl Model {
    /// Trains a model from scratch. Pure in `(spec, train)`.
    pub fn fit(spec: &ModelSpec, train: &Dataset) -> Result<Self> {
        spec.validate()?;
        let task = train.task();
        if task == Task::Classification
            && spec.kind != ModelKind::LinearRegression
            && !train.has_both_classes()
        {
            return Err(Error::SingleClass);
        }
        let x = train.features();
        let y = train.targets();
        let state = match spec.kind {
            ModelKind::LinearRegression => {
                State::Linear(linear::fit(x, y, spec.get("ridge_fallback")))
            }
            ModelKind::LogisticRegression => State::Logistic(logistic::fit(
                x,
                y,
                spec.count("epochs"),
                spec.get("learning_rate"),
                spec.get("l2"),
            )),
            ModelKind::BoostedTrees => State::Trees(trees::fit(
                x,
                y,
                task,
                &trees::Params {
                    n_trees: spec.count("n_trees"),
                    max_depth: spec.count("max_depth"),
                    learning_rate: spec.get("learning_rate"),
                    min_samples_leaf: spec.count("min_samples_leaf"),
                },
            )),
            ModelKind::Mlp => State::Mlp(mlp::fit(
                x,
                y,
                task,
                spec.count("hidden"),
                spec.count("epochs"),
                spec.get("learning_rate"),
                spec.seed,
            )),
            ModelKind::KernelSvm => {
                let gamma = spec.get("gamma");
                State::Svm(svm::fit(
                    x,
                    y,
                    spec.count("epochs"),
                    (gamma > 0.0).then_some(gamma),
                    spec.seed,
                ))
            }
        };
        Ok(Self {
            spec: spec.clone(),
            task,
            m: train.n_features(),
            state,
        })
    }

    /// The "untrained" model: predicts 0 (regression) or class 0 everywhere.
    pub fn untrained(spec: &ModelSpec, task: Task, m: usize) -> Self {
        Self {
            spec: spec.clone(),
            task,
            m,
            state: State::Constant(0.0),
        }
    }

    /// Wraps a known linear model, e.g. the generator of a synthetic dataset.
    pub fn from_ground_truth(gt: &LinearGroundTruth) -> Self {
        let task = gt.task();
        let (kind, state) = match task {
            Task::Regression => (
                ModelKind::LinearRegression,
                State::Linear(linear::Linear {
                    weights: gt.weights.clone(),
                    intercept: gt.intercept,
                }),
            ),
            Task::Classification => (
                ModelKind::LogisticRegression,
                State::Logistic(logistic::Logistic {
                    weights: gt.weights.clone(),
                    intercept: gt.intercept,
                }),
            ),
        };
        Self {
            spec: ModelSpec::default_for(kind),
            task,
            m: gt.weights.len(),
            state,
        }
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    /// Linear weights and intercept, for linear and logistic models.
    pub fn linear_parameters(&self) -> Option<(&[f64], f64)> {
        match &self.state {
            State::Linear(l) => Some((&l.weights, l.intercept)),
            State::Logistic(l) => Some((&l.weights, l.intercept)),
            _ => None,
        }
    }

    pub fn forest(&self) -> Option<&Forest> {
        match &self.state {
            State::Trees(f) => Some(f),
            _ => None,
        }
    }

    /// Raw decision value: regression output, or the score thresholded for
    /// classification.
    pub fn decision(&self, x: &[f64]) -> f64 {
        match &self.state {
            State::Constant(c) => *c,
            State::Linear(l) => l.score(x),
            State::Logistic(l) => l.score(x),
            State::Trees(f) => f.raw(x),
            State::Mlp(n) => n.raw(x),
            State::Svm(s) => s.score(x),
        }
    }

    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        check_dims(self.m, x.len())?;
        Ok(self.output(x))
    }

    pub fn predict_batch(&self, rows: &[Vec<f64>]) -> Result<Vec<f64>> {
        rows.iter().map(|r| self.predict(r)).collect()
    }
}

impl Predictor for Model {
    fn n_features(&self) -> usize {
        self.m
    }

    fn task(&self) -> Task {
        self.task
    }

    fn output(&self, x: &[f64]) -> f64 {
        let d = self.decision(x);
        match self.task {
            Task::Regression => d,
            Task::Classification => {
                let threshold = match &self.state {
                    // least squares on 0/1 targets
                    State::Linear(_) => 0.5,
                    State::Constant(_) => return 0.0,
                    _ => 0.0,
                };
                if d >= threshold {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spec_validation() {
        assert!(ModelSpec::default_for(ModelKind::BoostedTrees).with("n_trees", 0.0).is_err());
        assert!(ModelSpec::default_for(ModelKind::BoostedTrees).with("n_trees", 2.5).is_err());
        assert!(ModelSpec::default_for(ModelKind::Mlp).with("learning_rate", 0.0).is_err());
        assert!(ModelSpec::default_for(ModelKind::Mlp).with("n_trees", 3.0).is_err());
        let s = ModelSpec::default_for(ModelKind::Mlp).with("epochs", 200.0).unwrap();
        assert_eq!(s.count("epochs"), 200);
        assert_eq!(s.count("hidden"), 9);
    }

    #[test]
    fn zero_weight_linear_predicts_intercept() {
        let m = Model::from_ground_truth(&LinearGroundTruth {
            weights: vec![0.0, 0.0],
            intercept: 1.5,
            link: crate::dataset::Link::Identity,
        });
        assert_eq!(m.predict(&[3.0, -4.0]).unwrap(), 1.5);
        assert!(matches!(m.predict(&[1.0]), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn logistic_boundary_is_class_one() {
        let m = Model::from_ground_truth(&LinearGroundTruth {
            weights: vec![1.0],
            intercept: -2.0,
            link: crate::dataset::Link::Heaviside,
        });
        assert_eq!(m.predict(&[2.0]).unwrap(), 1.0);
        assert_eq!(m.predict(&[1.9]).unwrap(), 0.0);
    }

    #[test]
    fn batch_matches_scalar() {
        let m = Model::from_ground_truth(&LinearGroundTruth {
            weights: vec![0.5, -1.0],
            intercept: 0.1,
            link: crate::dataset::Link::Identity,
        });
        assert!(m.predict_batch(&[]).unwrap().is_empty());
        let rows = vec![vec![1.0, 2.0], vec![-3.0, 0.5]];
        let batch = m.predict_batch(&rows).unwrap();
        assert_eq!(batch[0], m.predict(&rows[0]).unwrap());
        assert_eq!(batch[1], m.predict(&rows[1]).unwrap());
    }

    #[test]
    fn single_class_rejected() {
        let d = Dataset::from_rows(vec![vec![0.0], vec![1.0]], vec![1.0, 1.0], Task::Classification).unwrap();
        for kind in [ModelKind::LogisticRegression, ModelKind::BoostedTrees, ModelKind::Mlp, ModelKind::KernelSvm] {
            assert!(matches!(Model::fit(&ModelSpec::default_for(kind), &d), Err(Error::SingleClass)));
        }
        assert!(Model::fit(&ModelSpec::default_for(ModelKind::LinearRegression), &d).is_ok());
    }
}
