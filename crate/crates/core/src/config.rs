//! Experiment configuration files.
//!
//! Configs are TOML: flat `key = value` pairs grouped in sections. Relative
//! paths inside a config file are resolved against the file's directory.
//!
//! ```toml
//! [experiment]
//! name = "linear"
//! strategies = ["baseline", "interactive_occlusion"]
//! query_size = 1
//! iterations = 30
//! n_models = 5
//! n_shuffles = 5
//! seed = 0
//! output_dir = "../results/linear"
//!
//! [dataset]
//! kind = "linear"
//! n_train = 100
//! n_test = 100
//! features = 5
//!
//! [model]
//! kind = "linear_regression"
//! ```
//!
//! Keys of `[model]` and `[oracle]` other than `kind` and `seed` are model
//! hyperparameters.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dataset::Task;
use crate::engine::StrategyKind;
use crate::error::{Error, Result};
use crate::expert::AttributionMethod;
use crate::models::{ModelKind, ModelSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentSection,
    pub dataset: DatasetSpec,
    pub model: ModelSection,
    /// Model fit on the complete CSV dataset to act as the expert.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oracle: Option<ModelSection>,
    #[serde(default)]
    pub service: ServiceSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    pub name: String,
    pub strategies: Vec<StrategyKind>,
    pub query_size: usize,
    pub iterations: usize,
    #[serde(default = "one")]
    pub n_models: usize,
    #[serde(default = "one")]
    pub n_shuffles: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
    /// SHAP augmentation repetitions; defaults to the feature count.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub background: Option<Vec<f64>>,
    /// Sampled orderings for SHAP above the exact-enumeration limit.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_perms: Option<usize>,
    /// Attribution method the simulated expert inspects for CAIPI feedback.
    #[serde(default = "default_method")]
    pub caipi_method: AttributionMethod,
}

fn one() -> usize {
    1
}

fn default_output() -> PathBuf {
    PathBuf::from("results")
}

fn default_method() -> AttributionMethod {
    AttributionMethod::Occlusion
}

/// Which labels a CSV scenario's Baseline runs learn from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelSource {
    /// Predictions of the oracle model.
    #[default]
    Oracle,
    /// Labels recorded in the file.
    Recorded,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DatasetSpec {
    Linear {
        n_train: usize,
        n_test: usize,
        features: usize,
    },
    Logistic {
        n_train: usize,
        n_test: usize,
        features: usize,
    },
    Csv {
        path: PathBuf,
        schema: PathBuf,
        test_fraction: f64,
        #[serde(default)]
        baseline_labels: LabelSource,
    },
}

impl DatasetSpec {
    pub fn kind_name(&self) -> &'static str {
        match self {
            DatasetSpec::Linear { .. } => "linear",
            DatasetSpec::Logistic { .. } => "logistic",
            DatasetSpec::Csv { .. } => "csv",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSection {
    pub kind: ModelKind,
    #[serde(default)]
    pub seed: u64,
    #[serde(flatten)]
    pub hyperparameters: BTreeMap<String, f64>,
}

impl ModelSection {
    pub fn spec(&self) -> Result<ModelSpec> {
        ModelSpec::new(self.kind, self.hyperparameters.clone(), self.seed)
            .map_err(|e| Error::Config(e.to_string()))
    }
}

impl From<&ModelSpec> for ModelSection {
    fn from(spec: &ModelSpec) -> Self {
        Self {
            kind: spec.kind,
            seed: spec.seed,
            hyperparameters: spec.hyperparameters.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServiceSection {
    #[serde(default = "default_bind")]
    pub bind: String,
    /// Session event logs; defaults to `<output_dir>/sessions`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub log_dir: Option<PathBuf>,
}

fn default_bind() -> String {
    "127.0.0.1:8080".into()
}

impl Default for ServiceSection {
    fn default() -> Self {
        Self {
            bind: default_bind(),
            log_dir: None,
        }
    }
}

/// Column roles of a CSV dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Schema {
    pub task: Task,
    pub target: String,
    pub features: Vec<String>,
}

impl Schema {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        if !path.exists() {
            return Err(Error::MissingFile(path.to_path_buf()));
        }
        let text = std::fs::read_to_string(path)?;
        let schema: Schema =
            toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        if schema.features.is_empty() {
            return Err(Error::Config(format!("{}: no feature columns", path.display())));
        }
        Ok(schema)
    }

    pub fn feature_refs(&self) -> Vec<&str> {
        self.features.iter().map(String::as_str).collect()
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))?;
        cfg.check_values()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Parses a config file, resolves its relative paths and validates it.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        if !path.exists() {
            return Err(Error::MissingFile(path.to_path_buf()));
        }
        let mut cfg = Self::from_toml_str(&std::fs::read_to_string(path)?)?;
        cfg.resolve_paths(path.parent().unwrap_or(Path::new(".")));
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let join = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        join(&mut self.experiment.output_dir);
        if let Some(dir) = &mut self.service.log_dir {
            join(dir);
        }
        if let DatasetSpec::Csv { path, schema, .. } = &mut self.dataset {
            join(path);
            join(schema);
        }
    }

    pub fn session_log_dir(&self) -> PathBuf {
        self.service
            .log_dir
            .clone()
            .unwrap_or_else(|| self.experiment.output_dir.join("sessions"))
    }

    fn check_values(&self) -> Result<()> {
        let e = &self.experiment;
        let fail = |msg: &str| Err(Error::Config(msg.to_string()));
        if e.strategies.is_empty() {
            return fail("strategy list is empty");
        }
        if e.query_size == 0 || e.n_models == 0 || e.n_shuffles == 0 {
            return fail("query_size, n_models and n_shuffles must be at least 1");
        }
        if e.k == Some(0) || e.n_perms == Some(0) {
            return fail("k and n_perms must be at least 1");
        }
        self.model.spec()?;
        if let Some(o) = &self.oracle {
            o.spec()?;
        }
        match &self.dataset {
            DatasetSpec::Linear { n_train, n_test, features } | DatasetSpec::Logistic { n_train, n_test, features } => {
                if *n_train == 0 || *n_test == 0 || *features == 0 {
                    return fail("synthetic dataset sizes must be at least 1");
                }
                if self.oracle.is_some() {
                    return fail("synthetic datasets use their generating model as oracle");
                }
            }
            DatasetSpec::Csv { test_fraction, .. } => {
                if !(*test_fraction > 0.0 && *test_fraction < 1.0) {
                    return fail("test_fraction must lie in (0, 1)");
                }
                if self.oracle.is_none() {
                    return fail("csv datasets need an [oracle] section");
                }
                if e.n_models != 1 {
                    return fail("csv datasets have a single oracle; set n_models = 1");
                }
            }
        }
        Ok(())
    }

    /// Checks that referenced files exist, on top of the value checks done
    /// while parsing.
    pub fn validate(&self) -> Result<()> {
        self.check_values()?;
        if let DatasetSpec::Csv { path, schema, .. } = &self.dataset {
            for p in [path, schema] {
                if !p.exists() {
                    return Err(Error::MissingFile(p.clone()));
                }
            }
        }
        Ok(())
    }

    pub fn model_spec(&self) -> Result<ModelSpec> {
        self.model.spec()
    }

    pub fn oracle_spec(&self) -> Result<Option<ModelSpec>> {
        self.oracle.as_ref().map(ModelSection::spec).transpose()
    }
}
