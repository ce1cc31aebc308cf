//! Turning corrected explanations into extra training samples.
//!
//! Every operation here emits exactly `2M` samples per corrected query
//! sample (`2K` for [`augment_shap`], with `K = M` by default): informative
//! samples interleaved with copies of the original `(x, y)`, then plain
//! copies as padding when the correction is partial. Keeping the budget
//! equal means strategies differ only in *what* they add, not how much.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::attribution::Attribution;
use crate::dataset::{Background, Task};
use crate::error::{Error, Result};

/// Expert feedback for one queried sample.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Correction {
    /// Corrected (or confirmed) target.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<f64>,
    /// Corrected attributions by feature index; may be partial.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub attributions: BTreeMap<usize, f64>,
    /// Features flagged as irrelevant (counterexample feedback).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub irrelevant_set: Option<BTreeSet<usize>>,
}

impl Correction {
    pub fn label_only(label: f64) -> Self {
        Self {
            label: Some(label),
            ..Self::default()
        }
    }

    pub fn with_attributions(label: f64, attributions: BTreeMap<usize, f64>) -> Self {
        Self {
            label: Some(label),
            attributions,
            irrelevant_set: None,
        }
    }

    pub fn with_irrelevant(label: f64, set: BTreeSet<usize>) -> Self {
        Self {
            label: Some(label),
            attributions: BTreeMap::new(),
            irrelevant_set: Some(set),
        }
    }

    /// True when the correction carries no explanation feedback.
    pub fn is_label_only(&self) -> bool {
        self.attributions.is_empty() && self.irrelevant_set.as_ref().is_none_or(BTreeSet::is_empty)
    }

    /// Checks index ranges, exclusivity of the two feedback kinds and, for
    /// classification, that labels are 0/1 and attributions -1/0/1.
    pub fn validate(&self, task: Task, m: usize) -> Result<()> {
        if !self.attributions.is_empty() && self.irrelevant_set.as_ref().is_some_and(|s| !s.is_empty()) {
            return Err(Error::InvalidCorrection(
                "attributions and irrelevant_set are mutually exclusive".into(),
            ));
        }
        let indices = self
            .attributions
            .keys()
            .chain(self.irrelevant_set.iter().flatten());
        for &i in indices {
            if i >= m {
                return Err(Error::FeatureOutOfRange { index: i, features: m });
            }
        }
        if let Some(l) = self.label {
            if !l.is_finite() {
                return Err(Error::InvalidCorrection("label must be finite".into()));
            }
        }
        if self.attributions.values().any(|v| !v.is_finite()) {
            return Err(Error::InvalidCorrection("attributions must be finite".into()));
        }
        if task == Task::Classification {
            if let Some(l) = self.label {
                if l != 0.0 && l != 1.0 {
                    return Err(Error::InvalidCorrection(format!("label {l} is not a class")));
                }
            }
            if let Some(v) = self
                .attributions
                .values()
                .find(|&&v| v != -1.0 && v != 0.0 && v != 1.0)
            {
                return Err(Error::InvalidCorrection(format!(
                    "classification attributions must be -1, 0 or 1, got {v}"
                )));
            }
        }
        Ok(())
    }
    /// Like [`Correction::validate`], but for Shapley feedback: Shapley
    /// values of a hard classifier are fractional, so classification values
    /// only need to lie in [-1, 1].
    pub fn validate_shapley(&self, task: Task, m: usize) -> Result<()> {
        if task != Task::Classification {
            return self.validate(task, m);
        }
        if let Some(v) = self.attributions.values().find(|v| !(-1.0..=1.0).contains(*v)) {
            return Err(Error::InvalidCorrection(format!(
                "classification Shapley values must lie in [-1, 1], got {v}"
            )));
        }
        let mut signs = self.clone();
        signs.attributions.values_mut().for_each(|v| *v = v.signum() * (*v != 0.0) as u8 as f64);
        signs.validate(task, m)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Original,
    OcclusionAug,
    ShapAug,
    CaipiCounterexample,
    Oversample,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub features: Vec<f64>,
    pub target: f64,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AugmentedBatch {
    pub samples: Vec<Sample>,
}

impl AugmentedBatch {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn count(&self, provenance: Provenance) -> usize {
        self.samples.iter().filter(|s| s.provenance == provenance).count()
    }

    /// `(features, target)` pairs, dropping provenance.
    pub fn pairs(&self) -> Vec<(Vec<f64>, f64)> {
        self.samples
            .iter()
            .map(|s| (s.features.clone(), s.target))
            .collect()
    }

    fn push(&mut self, features: Vec<f64>, target: f64, provenance: Provenance) {
        self.samples.push(Sample {
            features,
            target,
            provenance,
        });
    }

    fn copy_of(&mut self, x: &[f64], y: f64) {
        self.push(x.to_vec(), y, Provenance::Oversample);
    }

    fn pad_to(&mut self, total: usize, x: &[f64], y: f64) {
        while self.samples.len() < total {
            self.copy_of(x, y);
        }
    }
}

/// Class for an augmented classification target: `H(v - 0.5)`, with the
/// boundary `v = 0.5` mapped to 1.
pub fn heaviside_target(v: f64) -> f64 {
    if v >= 0.5 {
        1.0
    } else {
        0.0
    }
}

fn resolve_target(v: f64, task: Task) -> f64 {
    match task {
        Task::Regression => v,
        Task::Classification => heaviside_target(v),
    }
}

fn check_sample(x: &[f64], y: f64, b: &Background, task: Task) -> Result<usize> {
    let m = x.len();
    b.check(m)?;
    if task == Task::Classification && y != 0.0 && y != 1.0 {
        return Err(Error::InvalidCorrection(format!("label {y} is not a class")));
    }
    Ok(m)
}

/// Occlusion augmentation: for each available corrected attribution
/// `R*_i`, the sample `x` with feature `i` set to `b_i` and target
/// `y - R*_i`, followed by a copy of `(x, y)`; padded with copies to `2M`.
pub fn augment_occlusion(
    x: &[f64],
    y: f64,
    corr: &Correction,
    b: &Background,
    task: Task,
) -> Result<AugmentedBatch> {
    let m = check_sample(x, y, b, task)?;
    if corr.attributions.is_empty() {
        return Err(Error::InvalidCorrection("no attributions to augment from".into()));
    }
    let mut batch = AugmentedBatch::default();
    for (&i, &r) in &corr.attributions {
        if i >= m {
            return Err(Error::FeatureOutOfRange { index: i, features: m });
        }
        let mut aug = x.to_vec();
        aug[i] = b.values[i];
        batch.push(aug, resolve_target(y - r, task), Provenance::OcclusionAug);
        batch.copy_of(x, y);
    }
    batch.pad_to(2 * m, x, y);
    Ok(batch)
}

/// One SHAP augmentation draw: a feature ordering and how many of its
/// leading features are replaced by the background.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ShapDraw {
    pub ordering: Vec<usize>,
    pub replaced: usize,
}

impl ShapDraw {
    pub fn sample<R: Rng + ?Sized>(m: usize, rng: &mut R) -> Self {
        let mut ordering: Vec<usize> = (0..m).collect();
        ordering.shuffle(rng);
        let replaced = rng.random_range(1..=m);
        Self { ordering, replaced }
    }
}

/// SHAP augmentation with `k` random draws. Each draw replaces a random
/// prefix `D` of a random ordering by the background and uses the target
/// `y - sum_{j in D} R*_j`, followed by a copy of `(x, y)`.
pub fn augment_shap<R: Rng + ?Sized>(
    x: &[f64],
    y: f64,
    r_star: &Attribution,
    b: &Background,
    k: usize,
    rng: &mut R,
    task: Task,
) -> Result<AugmentedBatch> {
    let m = x.len();
    if k == 0 {
        return Err(Error::InvalidArgument("k must be at least 1".into()));
    }
    let draws: Vec<ShapDraw> = (0..k).map(|_| ShapDraw::sample(m, rng)).collect();
    augment_shap_from_draws(x, y, r_star, b, &draws, task)
}

/// [`augment_shap`] with explicit draws.
pub fn augment_shap_from_draws(
    x: &[f64],
    y: f64,
    r_star: &Attribution,
    b: &Background,
    draws: &[ShapDraw],
    task: Task,
) -> Result<AugmentedBatch> {
    let m = check_sample(x, y, b, task)?;
    if r_star.len() != m || !r_star.is_full() {
        return Err(Error::InvalidCorrection(
            "SHAP augmentation needs a complete attribution".into(),
        ));
    }
    let mut batch = AugmentedBatch::default();
    for draw in draws {
        if draw.ordering.len() != m || draw.replaced == 0 || draw.replaced > m {
            return Err(Error::InvalidArgument(format!("invalid draw {draw:?}")));
        }
        let mut aug = x.to_vec();
        let mut target = y;
        for &j in &draw.ordering[..draw.replaced] {
            if j >= m {
                return Err(Error::FeatureOutOfRange { index: j, features: m });
            }
            aug[j] = b.values[j];
            target -= r_star.values[j];
        }
        batch.push(aug, resolve_target(target, task), Provenance::ShapAug);
        batch.copy_of(x, y);
    }
    Ok(batch)
}

/// Counterexamples: for each irrelevant feature `c`, the sample `x` with
/// `x_c = b_c` and the label unchanged, then a copy of `(x, y)`; padded to
/// `2m`.
pub fn augment_caipi(
    x: &[f64],
    y: f64,
    c: &BTreeSet<usize>,
    b: &Background,
    m: usize,
) -> Result<AugmentedBatch> {
    let features = x.len();
    b.check(features)?;
    if c.is_empty() {
        return Err(Error::InvalidCorrection("empty irrelevant set".into()));
    }
    if c.len() > m {
        return Err(Error::InvalidArgument(format!(
            "{} counterexamples exceed the budget of {m}",
            c.len()
        )));
    }
    let mut batch = AugmentedBatch::default();
    for &i in c {
        if i >= features {
            return Err(Error::FeatureOutOfRange { index: i, features });
        }
        let mut aug = x.to_vec();
        aug[i] = b.values[i];
        batch.push(aug, y, Provenance::CaipiCounterexample);
        batch.copy_of(x, y);
    }
    batch.pad_to(2 * m, x, y);
    Ok(batch)
}

/// `2m` plain copies of `(x, y)`.
pub fn augment_baseline(x: &[f64], y: f64, m: usize) -> AugmentedBatch {
    let mut batch = AugmentedBatch::default();
    batch.pad_to(2 * m, x, y);
    batch
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from;

    fn bg0(m: usize) -> Background {
        Background::new(vec![0.0; m])
    }

    fn attrs(pairs: &[(usize, f64)]) -> BTreeMap<usize, f64> {
        pairs.iter().copied().collect()
    }

    #[test]
    fn heaviside_boundary() {
        assert_eq!(heaviside_target(1.0 - 1.0), 0.0);
        assert_eq!(heaviside_target(1.0 - 0.0), 1.0);
        assert_eq!(heaviside_target(0.0 - (-1.0)), 1.0);
        assert_eq!(heaviside_target(0.5), 1.0);
    }

    #[test]
    fn occlusion_trace() {
        let corr = Correction::with_attributions(5.0, attrs(&[(0, 1.0), (1, 2.0)]));
        let batch = augment_occlusion(&[1.0, 2.0], 5.0, &corr, &bg0(2), Task::Regression).unwrap();
        assert_eq!(
            batch.pairs(),
            vec![
                (vec![0.0, 2.0], 4.0),
                (vec![1.0, 2.0], 5.0),
                (vec![1.0, 0.0], 3.0),
                (vec![1.0, 2.0], 5.0),
            ]
        );
    }

    #[test]
    fn occlusion_classification_flip() {
        let corr = Correction::with_attributions(1.0, attrs(&[(0, 1.0)]));
        let batch = augment_occlusion(&[3.0], 1.0, &corr, &bg0(1), Task::Classification).unwrap();
        assert_eq!(batch.samples[0].target, 0.0);
    }

    #[test]
    fn occlusion_pads_partial_corrections() {
        let corr = Correction::with_attributions(1.0, attrs(&[(2, 0.5)]));
        let batch = augment_occlusion(&[1.0, 1.0, 1.0, 1.0], 1.0, &corr, &bg0(4), Task::Regression).unwrap();
        assert_eq!(batch.len(), 8);
        assert_eq!(batch.count(Provenance::OcclusionAug), 1);
        assert_eq!(batch.count(Provenance::Oversample), 7);
    }

    #[test]
    fn occlusion_rejects_bad_index() {
        let corr = Correction::with_attributions(1.0, attrs(&[(5, 0.5)]));
        assert!(matches!(
            augment_occlusion(&[1.0, 1.0], 1.0, &corr, &bg0(2), Task::Regression),
            Err(Error::FeatureOutOfRange { .. })
        ));
    }

    #[test]
    fn shap_full_prefix_trace() {
        let r = Attribution::full(vec![1.0, 2.0]);
        let draw = ShapDraw {
            ordering: vec![1, 0],
            replaced: 2,
        };
        let batch = augment_shap_from_draws(&[1.0, 2.0], 5.0, &r, &bg0(2), &[draw], Task::Regression).unwrap();
        assert_eq!(batch.pairs(), vec![(vec![0.0, 0.0], 2.0), (vec![1.0, 2.0], 5.0)]);
    }

    #[test]
    fn shap_single_feature_matches_occlusion() {
        let r = Attribution::full(vec![0.7]);
        let b = Background::new(vec![0.25]);
        let mut rng = rng_from(1, &[]);
        let shap = augment_shap(&[2.0], 3.0, &r, &b, 1, &mut rng, Task::Regression).unwrap();
        let occ = augment_occlusion(
            &[2.0],
            3.0,
            &Correction::with_attributions(3.0, attrs(&[(0, 0.7)])),
            &b,
            Task::Regression,
        )
        .unwrap();
        assert_eq!(shap.pairs(), occ.pairs());
    }

    #[test]
    fn shap_rejects_partial() {
        let mut partial = Attribution::full(vec![1.0, 1.0]);
        partial.available[1] = false;
        let mut rng = rng_from(0, &[]);
        assert!(augment_shap(&[1.0, 1.0], 1.0, &partial, &bg0(2), 2, &mut rng, Task::Regression).is_err());
    }

    #[test]
    fn caipi_budget_and_labels() {
        let set: BTreeSet<usize> = [3].into_iter().collect();
        let batch = augment_caipi(&[1.0; 5], 1.0, &set, &bg0(5), 5).unwrap();
        assert_eq!(batch.len(), 10);
        assert_eq!(batch.count(Provenance::CaipiCounterexample), 1);
        assert!(batch.samples.iter().all(|s| s.target == 1.0));
        assert!(augment_caipi(&[1.0; 5], 1.0, &BTreeSet::new(), &bg0(5), 5).is_err());
    }

    #[test]
    fn baseline_copies() {
        let b = augment_baseline(&[1.0, 2.0], 3.0, 5);
        assert_eq!(b.len(), 10);
        assert!(b.samples.iter().all(|s| s.features == vec![1.0, 2.0] && s.target == 3.0));
        assert_eq!(augment_baseline(&[1.0], 0.0, 1).len(), 2);
    }

    #[test]
    fn correction_validation() {
        let c = Correction::with_attributions(1.0, attrs(&[(0, 0.5)]));
        assert!(c.validate(Task::Regression, 2).is_ok());
        assert!(c.validate(Task::Classification, 2).is_err());
        assert!(Correction::label_only(2.0).validate(Task::Classification, 2).is_err());
        let both = Correction {
            label: Some(1.0),
            attributions: attrs(&[(0, 1.0)]),
            irrelevant_set: Some([1].into_iter().collect()),
        };
        assert!(both.validate(Task::Regression, 2).is_err());
        let oob = Correction::with_irrelevant(1.0, [4].into_iter().collect());
        assert!(oob.validate(Task::Regression, 2).is_err());
    }
}
