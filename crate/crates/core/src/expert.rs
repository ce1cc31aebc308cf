//! Simulated experts: a known "correct" model that supplies labels and
//! explanations, and a rule-based Titanic expert encoding "women and
//! children first".

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::attribution::{self, Attribution};
use crate::augmentation::Correction;
use crate::dataset::Background;
use crate::error::{Error, Result};
use crate::models::{Model, Predictor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExpertKind {
    GroundTruthModel,
    TitanicRules,
    Human,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttributionMethod {
    Occlusion,
    Shap,
}

#[derive(Debug, Clone)]
pub struct Expert {
    pub kind: ExpertKind,
    pub oracle_model: Option<Arc<Model>>,
    pub attribution_method: AttributionMethod,
    /// Orderings sampled when exact SHAP enumeration is too large.
    pub n_perms: Option<usize>,
}

impl Expert {
    pub fn ground_truth(model: Arc<Model>, method: AttributionMethod) -> Self {
        Self {
            kind: ExpertKind::GroundTruthModel,
            oracle_model: Some(model),
            attribution_method: method,
            n_perms: None,
        }
    }

    pub fn titanic_rules() -> Self {
        Self {
            kind: ExpertKind::TitanicRules,
            oracle_model: None,
            attribution_method: AttributionMethod::Occlusion,
            n_perms: None,
        }
    }

    pub fn human() -> Self {
        Self {
            kind: ExpertKind::Human,
            oracle_model: None,
            attribution_method: AttributionMethod::Occlusion,
            n_perms: None,
        }
    }

    fn oracle(&self) -> Result<&Model> {
        match (self.kind, &self.oracle_model) {
            (ExpertKind::GroundTruthModel, Some(m)) => Ok(m),
            (ExpertKind::GroundTruthModel, None) => Err(Error::InvalidArgument(
                "ground-truth expert without an oracle model".into(),
            )),
            (kind, _) => Err(Error::InvalidArgument(format!(
                "{kind:?} expert has no oracle model"
            ))),
        }
    }

    /// Label for `x`. The rule expert passes through the recorded label.
    pub fn oracle_label(&self, x: &[f64], recorded: Option<f64>) -> Result<f64> {
        match self.kind {
            ExpertKind::GroundTruthModel => self.oracle()?.predict(x),
            ExpertKind::TitanicRules => recorded.ok_or_else(|| {
                Error::InvalidArgument("rule expert needs the recorded label".into())
            }),
            ExpertKind::Human => Err(Error::InvalidArgument(
                "human labels come from the session service".into(),
            )),
        }
    }

    /// The oracle model's full attribution at `x`, with the configured
    /// method. SHAP is exact up to the enumeration limit and sampled above.
    pub fn oracle_explanation<R: rand::Rng + ?Sized>(
        &self,
        x: &[f64],
        b: &Background,
        rng: &mut R,
    ) -> Result<Attribution> {
        let model = self.oracle()?;
        match self.attribution_method {
            AttributionMethod::Occlusion => attribution::occlusion(model, x, b),
            AttributionMethod::Shap => {
                let m = model.n_features();
                if m <= attribution::EXACT_FEATURE_LIMIT {
                    attribution::shap_exact(model, x, b)
                } else {
                    let n = self.n_perms.unwrap_or_else(|| attribution::default_permutations(m));
                    attribution::shap_permutation(model, x, b, n, rng)
                }
            }
        }
    }

    /// Full correction from the oracle: its label and attribution.
    pub fn oracle_attribution<R: rand::Rng + ?Sized>(
        &self,
        x: &[f64],
        b: &Background,
        rng: &mut R,
    ) -> Result<Correction> {
        let r = self.oracle_explanation(x, b, rng)?;
        Ok(Correction::with_attributions(self.oracle_label(x, None)?, r.to_map()))
    }
}

/// Index of the smallest-magnitude attribution, lowest index on ties.
pub fn least_important_feature(r: &Attribution) -> Result<usize> {
    if r.is_empty() || !r.is_full() {
        return Err(Error::InvalidArgument("needs a complete attribution".into()));
    }
    let mut best = 0;
    for (i, v) in r.values.iter().enumerate().skip(1) {
        if v.abs() < r.values[best].abs() {
            best = i;
        }
    }
    Ok(best)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RuleMode {
    Occlusion,
    Caipi,
}

/// Feature positions in the Titanic layout `(class, sex, age, sibsp)`.
pub mod titanic {
    pub const CLASS: usize = 0;
    pub const SEX: usize = 1;
    pub const AGE: usize = 2;
    pub const SIBSP: usize = 3;
    pub const FEATURES: [&str; 4] = ["class", "sex", "age", "sibsp"];
    pub const FEMALE: f64 = 1.0;
    pub const MALE: f64 = 0.0;
    pub const CHILD_AGE: f64 = 12.0;
}

/// "Women and children first" for survivors: a female survivor gets
/// `R*_sex = 1` (or every other feature flagged irrelevant), a surviving
/// child under 12 gets `R*_age = 1` (or every feature but age flagged).
/// Everyone else gets a label-only correction.
pub fn titanic_rules(x: &[f64], y: f64, mode: RuleMode) -> Result<Correction> {
    use titanic::*;
    if x.len() != FEATURES.len() {
        return Err(Error::DimensionMismatch {
            expected: FEATURES.len(),
            got: x.len(),
        });
    }
    if y != 0.0 && y != 1.0 {
        return Err(Error::InvalidCorrection(format!("label {y} is not a class")));
    }
    let key = if y != 1.0 {
        None
    } else if x[SEX] == FEMALE {
        Some(SEX)
    } else if x[AGE] < CHILD_AGE {
        Some(AGE)
    } else {
        None
    };
    Ok(match (key, mode) {
        (None, _) => Correction::label_only(y),
        (Some(f), RuleMode::Occlusion) => {
            Correction::with_attributions(y, BTreeMap::from([(f, 1.0)]))
        }
        (Some(f), RuleMode::Caipi) => {
            let others: BTreeSet<usize> = (0..FEATURES.len()).filter(|&i| i != f).collect();
            Correction::with_irrelevant(y, others)
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{LinearGroundTruth, Link};
    use crate::rng::rng_from;

    #[test]
    fn least_important() {
        assert_eq!(least_important_feature(&Attribution::full(vec![3.0, -0.1, 2.0])).unwrap(), 1);
        assert_eq!(least_important_feature(&Attribution::full(vec![0.0, 0.0])).unwrap(), 0);
        assert!(least_important_feature(&Attribution::full(vec![])).is_err());
    }

    #[test]
    fn titanic_examples() {
        let female_adult = [1.0, titanic::FEMALE, 30.0, 0.0];
        let c = titanic_rules(&female_adult, 1.0, RuleMode::Occlusion).unwrap();
        assert_eq!(c.attributions, BTreeMap::from([(titanic::SEX, 1.0)]));

        let boy = [3.0, titanic::MALE, 8.0, 1.0];
        let c = titanic_rules(&boy, 1.0, RuleMode::Caipi).unwrap();
        assert_eq!(
            c.irrelevant_set,
            Some(BTreeSet::from([titanic::CLASS, titanic::SEX, titanic::SIBSP]))
        );

        let c = titanic_rules(&female_adult, 0.0, RuleMode::Occlusion).unwrap();
        assert!(c.is_label_only());
        assert_eq!(c.label, Some(0.0));

        // age 12 is not a child
        let c = titanic_rules(&[2.0, titanic::MALE, 12.0, 0.0], 1.0, RuleMode::Occlusion).unwrap();
        assert!(c.is_label_only());

        assert!(titanic_rules(&[1.0, 2.0], 1.0, RuleMode::Occlusion).is_err());
    }

    #[test]
    fn linear_oracle_attribution() {
        let gt = LinearGroundTruth {
            weights: vec![0.5, -2.0],
            intercept: 1.0,
            link: Link::Identity,
        };
        let e = Expert::ground_truth(Arc::new(Model::from_ground_truth(&gt)), AttributionMethod::Occlusion);
        let b = Background::new(vec![1.0, 1.0]);
        let c = e.oracle_attribution(&[3.0, 0.0], &b, &mut rng_from(0, &[])).unwrap();
        assert_eq!(c.label, Some(0.5 * 3.0 + 1.0));
        assert!((c.attributions[&0] - 1.0).abs() < 1e-12);
        assert!((c.attributions[&1] - 2.0).abs() < 1e-12);

        let at_bg = e.oracle_attribution(&[1.0, 1.0], &b, &mut rng_from(0, &[])).unwrap();
        assert!(at_bg.attributions.values().all(|&v| v == 0.0));
    }

    #[test]
    fn wrong_kind_errors() {
        let e = Expert::titanic_rules();
        let b = Background::new(vec![0.0; 4]);
        assert!(e.oracle_attribution(&[0.0; 4], &b, &mut rng_from(0, &[])).is_err());
        assert_eq!(e.oracle_label(&[0.0; 4], Some(1.0)).unwrap(), 1.0);
        assert!(Expert::human().oracle_label(&[0.0], Some(1.0)).is_err());
    }
}
