//! Tabular data: the [`Dataset`] container, synthetic generators, CSV
//! ingestion, background inputs and seeded splits.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{self, stream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Regression,
    Classification,
}

/// An `N x M` feature matrix with targets and per-column metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Vec<Vec<f64>>,
    targets: Vec<f64>,
    feature_names: Vec<String>,
    discrete_mask: Vec<bool>,
    task: Task,
}

fn is_integral(v: f64) -> bool {
    v.is_finite() && v.fract() == 0.0
}

fn is_label(v: f64) -> bool {
    v == 0.0 || v == 1.0
}

impl Dataset {
    /// Builds a dataset, checking shape, label and discreteness invariants.
    pub fn new(
        features: Vec<Vec<f64>>,
        targets: Vec<f64>,
        feature_names: Vec<String>,
        discrete_mask: Vec<bool>,
        task: Task,
    ) -> Result<Self> {
        let m = feature_names.len();
        if features.is_empty() {
            return Err(Error::InvalidDataset("no rows".into()));
        }
        if m == 0 {
            return Err(Error::InvalidDataset("no features".into()));
        }
        if discrete_mask.len() != m {
            return Err(Error::InvalidDataset(format!(
                "discrete mask has {} entries for {m} features",
                discrete_mask.len()
            )));
        }
        if targets.len() != features.len() {
            return Err(Error::InvalidDataset(format!(
                "{} rows but {} targets",
                features.len(),
                targets.len()
            )));
        }
        for (r, row) in features.iter().enumerate() {
            if row.len() != m {
                return Err(Error::InvalidDataset(format!(
                    "row {r} has {} entries, expected {m}",
                    row.len()
                )));
            }
            for (c, &v) in row.iter().enumerate() {
                if !v.is_finite() {
                    return Err(Error::InvalidDataset(format!("non-finite value at ({r}, {c})")));
                }
                if discrete_mask[c] && !is_integral(v) {
                    return Err(Error::InvalidDataset(format!(
                        "discrete column `{}` holds non-integral value {v}",
                        feature_names[c]
                    )));
                }
            }
        }
        if task == Task::Classification && !targets.iter().all(|&t| is_label(t)) {
            return Err(Error::InvalidDataset("classification targets must be 0 or 1".into()));
        }
        if targets.iter().any(|t| !t.is_finite()) {
            return Err(Error::InvalidDataset("non-finite target".into()));
        }
        Ok(Self {
            features,
            targets,
            feature_names,
            discrete_mask,
            task,
        })
    }

    /// Like [`Dataset::new`] with generated names (`x0`, `x1`, ...) and the
    /// discrete mask inferred from the values.
    pub fn from_rows(features: Vec<Vec<f64>>, targets: Vec<f64>, task: Task) -> Result<Self> {
        let m = features.first().map_or(0, Vec::len);
        let names = (0..m).map(|i| format!("x{i}")).collect();
        let mask = infer_discrete(&features, m);
        Self::new(features, targets, names, mask, task)
    }

    pub fn n_rows(&self) -> usize {
        self.features.len()
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn task(&self) -> Task {
        self.task
    }

    pub fn features(&self) -> &[Vec<f64>] {
        &self.features
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i]
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn discrete_mask(&self) -> &[bool] {
        &self.discrete_mask
    }

    pub fn feature_index(&self, name: &str) -> Option<usize> {
        self.feature_names.iter().position(|n| n == name)
    }

    /// Rows at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        let features = indices.iter().map(|&i| self.features[i].clone()).collect();
        let targets = indices.iter().map(|&i| self.targets[i]).collect();
        Self::new(
            features,
            targets,
            self.feature_names.clone(),
            self.discrete_mask.clone(),
            self.task,
        )
    }

    /// Same rows, new targets (e.g. labels from an oracle model).
    pub fn with_targets(&self, targets: Vec<f64>) -> Result<Self> {
        Self::new(
            self.features.clone(),
            targets,
            self.feature_names.clone(),
            self.discrete_mask.clone(),
            self.task,
        )
    }

    /// Same metadata, different rows.
    pub fn with_rows(&self, features: Vec<Vec<f64>>, targets: Vec<f64>) -> Result<Self> {
        Self::new(
            features,
            targets,
            self.feature_names.clone(),
            self.discrete_mask.clone(),
            self.task,
        )
    }

    /// Row-wise concatenation; both sides must share the feature layout.
    pub fn concat(&self, other: &Dataset) -> Result<Self> {
        if other.n_features() != self.n_features() || other.task != self.task {
            return Err(Error::InvalidDataset("incompatible datasets".into()));
        }
        let mut features = self.features.clone();
        features.extend(other.features.iter().cloned());
        let mut targets = self.targets.clone();
        targets.extend_from_slice(&other.targets);
        self.with_rows(features, targets)
    }

    pub fn has_both_classes(&self) -> bool {
        let ones = self.targets.iter().filter(|&&t| t == 1.0).count();
        ones > 0 && ones < self.targets.len()
    }

    /// Writes the dataset as CSV: feature columns followed by `target_name`.
    pub fn write_csv(&self, path: impl AsRef<Path>, target_name: &str) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        let mut header: Vec<&str> = self.feature_names.iter().map(String::as_str).collect();
        header.push(target_name);
        w.write_record(&header)?;
        for (row, t) in self.features.iter().zip(&self.targets) {
            let mut rec: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            rec.push(t.to_string());
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn infer_discrete(features: &[Vec<f64>], m: usize) -> Vec<bool> {
    (0..m)
        .map(|c| features.iter().all(|row| row.get(c).copied().is_some_and(is_integral)))
        .collect()
}

/// Reference input supplying values for "unknown" features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Background {
    pub values: Vec<f64>,
}

impl Background {
    pub fn new(values: Vec<f64>) -> Self {
        Self { values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn check(&self, m: usize) -> Result<()> {
        if self.values.len() != m {
            return Err(Error::DimensionMismatch {
                expected: m,
                got: self.values.len(),
            });
        }
        Ok(())
    }
}

/// Column means, or lower medians for discrete columns.
pub fn compute_background(data: &Dataset) -> Background {
    let n = data.n_rows() as f64;
    let values = (0..data.n_features())
        .map(|c| {
            if data.discrete_mask[c] {
                let mut col: Vec<f64> = data.features.iter().map(|r| r[c]).collect();
                col.sort_by(f64::total_cmp);
                col[(col.len() - 1) / 2]
            } else {
                // Sorting first makes the mean independent of row order.
                let mut col: Vec<f64> = data.features.iter().map(|r| r[c]).collect();
                col.sort_by(f64::total_cmp);
                col.iter().sum::<f64>() / n
            }
        })
        .collect();
    Background { values }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Link {
    Identity,
    Heaviside,
}

/// A data-generating linear model `w . x + w0`, optionally thresholded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearGroundTruth {
    pub weights: Vec<f64>,
    pub intercept: f64,
    pub link: Link,
}

impl LinearGroundTruth {
    pub fn score(&self, x: &[f64]) -> f64 {
        self.weights
            .iter()
            .zip(x)
            .fold(self.intercept, |acc, (w, v)| acc + w * v)
    }

    /// Target for `x`; the Heaviside link maps a score of exactly 0 to 1.
    pub fn target(&self, x: &[f64]) -> f64 {
        let s = self.score(x);
        match self.link {
            Link::Identity => s,
            Link::Heaviside => {
                if s >= 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    pub fn task(&self) -> Task {
        match self.link {
            Link::Identity => Task::Regression,
            Link::Heaviside => Task::Classification,
        }
    }
}

fn check_sizes(n_train: usize, n_test: usize, m: usize) -> Result<()> {
    if n_train == 0 || n_test == 0 || m == 0 {
        return Err(Error::InvalidArgument(
            "n_train, n_test and m must all be at least 1".into(),
        ));
    }
    Ok(())
}

fn normal_rows(rng: &mut rng::Rng, n: usize, m: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| (0..m).map(|_| rng.sample::<f64, _>(StandardNormal)).collect())
        .collect()
}

fn labelled(gt: &LinearGroundTruth, rows: Vec<Vec<f64>>) -> Result<Dataset> {
    let targets = rows.iter().map(|r| gt.target(r)).collect();
    let m = gt.weights.len();
    Dataset::new(
        rows,
        targets,
        (0..m).map(|i| format!("x{i}")).collect(),
        vec![false; m],
        gt.task(),
    )
}

/// Standard-normal features with noiseless targets from a random linear model
/// whose weights and intercept are uniform on `[-1, 1]`.
pub fn generate_linear(
    seed: u64,
    n_train: usize,
    n_test: usize,
    m: usize,
) -> Result<(Dataset, Dataset, LinearGroundTruth)> {
    check_sizes(n_train, n_test, m)?;
    let mut rng = rng::rng_from(seed, &[stream::DATA]);
    let weights: Vec<f64> = (0..m).map(|_| rng.random_range(-1.0..=1.0)).collect();
    let intercept = rng.random_range(-1.0..=1.0);
    let train = normal_rows(&mut rng, n_train, m);
    let test = normal_rows(&mut rng, n_test, m);
    let gt = LinearGroundTruth {
        weights,
        intercept,
        link: Link::Identity,
    };
    Ok((labelled(&gt, train)?, labelled(&gt, test)?, gt))
}

const MAX_BALANCE_RETRIES: usize = 100;

/// As [`generate_linear`] but with Heaviside targets. If either split ends up
/// single-class the intercept is redrawn (up to 100 times).
pub fn generate_logistic(
    seed: u64,
    n_train: usize,
    n_test: usize,
    m: usize,
) -> Result<(Dataset, Dataset, LinearGroundTruth)> {
    check_sizes(n_train, n_test, m)?;
    if n_train < 2 || n_test < 2 {
        return Err(Error::InvalidArgument(
            "classification splits need at least two rows".into(),
        ));
    }
    let mut rng = rng::rng_from(seed, &[stream::DATA]);
    let weights: Vec<f64> = (0..m).map(|_| rng.random_range(-1.0..=1.0)).collect();
    let mut intercept = rng.random_range(-1.0..=1.0);
    let train = normal_rows(&mut rng, n_train, m);
    let test = normal_rows(&mut rng, n_test, m);
    for _ in 0..=MAX_BALANCE_RETRIES {
        let gt = LinearGroundTruth {
            weights: weights.clone(),
            intercept,
            link: Link::Heaviside,
        };
        let tr = labelled(&gt, train.clone())?;
        let te = labelled(&gt, test.clone())?;
        if tr.has_both_classes() && te.has_both_classes() {
            return Ok((tr, te, gt));
        }
        intercept = rng.random_range(-1.0..=1.0);
    }
    Err(Error::SingleClass)
}

/// Reads `target_column` and `feature_columns` (in that order) from a CSV
/// file. Rows with an empty or `NA` cell in a selected column are dropped;
/// the number of dropped rows is returned alongside the dataset.
pub fn load_csv_counted(
    path: impl AsRef<Path>,
    target_column: &str,
    feature_columns: &[&str],
    task: Task,
) -> Result<(Dataset, usize)> {
    let path = path.as_ref();
    if !path.exists() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_path(path)?;
    let headers = reader.headers()?.clone();
    let locate = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    };
    let target_idx = locate(target_column)?;
    let feature_idx = feature_columns
        .iter()
        .map(|c| locate(c))
        .collect::<Result<Vec<_>>>()?;

    let mut features = Vec::new();
    let mut targets = Vec::new();
    let mut dropped = 0;
    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        let cell = |idx: usize| record.get(idx).unwrap_or("").trim();
        let missing = |s: &str| s.is_empty() || s.eq_ignore_ascii_case("na") || s.eq_ignore_ascii_case("nan");
        if missing(cell(target_idx)) || feature_idx.iter().any(|&i| missing(cell(i))) {
            dropped += 1;
            continue;
        }
        let parse = |idx: usize, column: &str| {
            let raw = cell(idx);
            raw.parse::<f64>().map_err(|_| Error::NonNumeric {
                column: column.to_string(),
                line,
                value: raw.to_string(),
            })
        };
        let row = feature_idx
            .iter()
            .zip(feature_columns)
            .map(|(&i, c)| parse(i, c))
            .collect::<Result<Vec<_>>>()?;
        targets.push(parse(target_idx, target_column)?);
        features.push(row);
    }
    if features.is_empty() {
        return Err(Error::EmptyAfterDrop { dropped });
    }
    let mask = infer_discrete(&features, feature_columns.len());
    let names = feature_columns.iter().map(|s| s.to_string()).collect();
    Ok((Dataset::new(features, targets, names, mask, task)?, dropped))
}

pub fn load_csv(
    path: impl AsRef<Path>,
    target_column: &str,
    feature_columns: &[&str],
    task: Task,
) -> Result<Dataset> {
    load_csv_counted(path, target_column, feature_columns, task).map(|(d, _)| d)
}

/// Seeded shuffle then split; the last `round(N * test_fraction)` shuffled
/// rows form the test split.
pub fn split_shuffle(data: &Dataset, seed: u64, test_fraction: f64) -> Result<(Dataset, Dataset)> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::EmptySplit(format!(
            "test fraction {test_fraction} outside (0, 1)"
        )));
    }
    let n = data.n_rows();
    let n_test = (n as f64 * test_fraction).round() as usize;
    if n_test == 0 || n_test >= n {
        return Err(Error::EmptySplit(format!(
            "fraction {test_fraction} of {n} rows leaves an empty split"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng::rng_from(seed, &[stream::SHUFFLE]));
    let (train_idx, test_idx) = order.split_at(n - n_test);
    Ok((data.subset(train_idx)?, data.subset(test_idx)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn col_dataset(col: Vec<f64>, discrete: bool) -> Dataset {
        let n = col.len();
        Dataset::new(
            col.into_iter().map(|v| vec![v]).collect(),
            vec![0.0; n],
            vec!["a".into()],
            vec![discrete],
            Task::Regression,
        )
        .unwrap()
    }

    #[test]
    fn background_mean_and_median() {
        assert_eq!(compute_background(&col_dataset(vec![1.0, 3.0], false)).values, vec![2.0]);
        assert_eq!(compute_background(&col_dataset(vec![0.0, 0.0, 1.0], true)).values, vec![0.0]);
        // even count picks the lower middle value
        assert_eq!(
            compute_background(&col_dataset(vec![4.0, 1.0, 3.0, 2.0], true)).values,
            vec![2.0]
        );
    }

    #[test]
    fn linear_generator_shapes() {
        let (train, test, gt) = generate_linear(0, 20, 100, 5).unwrap();
        assert_eq!(test.n_rows(), 100);
        assert_eq!(test.n_features(), 5);
        assert_eq!(train.n_rows(), 20);
        assert_eq!(gt.weights.len(), 5);
        assert!(gt.weights.iter().all(|w| (-1.0..=1.0).contains(w)));
        assert_eq!(train.task(), Task::Regression);
    }

    #[test]
    fn linear_targets_recomputed_by_hand() {
        let (train, _, gt) = generate_linear(7, 3, 1, 2).unwrap();
        for (x, &y) in train.features().iter().zip(train.targets()) {
            let by_hand = gt.weights[0] * x[0] + gt.weights[1] * x[1] + gt.intercept;
            assert!((y - by_hand).abs() <= 1e-12);
        }
    }

    #[test]
    fn zero_weight_ground_truth_is_constant() {
        let gt = LinearGroundTruth {
            weights: vec![0.0; 3],
            intercept: 0.25,
            link: Link::Identity,
        };
        assert_eq!(gt.target(&[5.0, -2.0, 9.0]), 0.25);
    }

    #[test]
    fn heaviside_link() {
        let gt = |c: f64| LinearGroundTruth {
            weights: vec![0.0],
            intercept: c,
            link: Link::Heaviside,
        };
        assert_eq!(gt(0.3).target(&[1.0]), 1.0);
        assert_eq!(gt(-0.3).target(&[1.0]), 0.0);
        assert_eq!(gt(0.0).target(&[1.0]), 1.0);
    }

    #[test]
    fn logistic_generator_is_balanced() {
        let (train, test, gt) = generate_logistic(3, 50, 100, 5).unwrap();
        assert_eq!(train.task(), Task::Classification);
        assert_eq!(gt.link, Link::Heaviside);
        let frac = test.targets().iter().sum::<f64>() / test.n_rows() as f64;
        assert!(frac > 0.0 && frac < 1.0);
    }

    #[test]
    fn split_halves_and_is_deterministic() {
        let data = Dataset::from_rows((0..10).map(|i| vec![i as f64]).collect(), vec![0.0; 10], Task::Regression).unwrap();
        let (a, b) = split_shuffle(&data, 4, 0.5).unwrap();
        assert_eq!((a.n_rows(), b.n_rows()), (5, 5));
        let (a2, b2) = split_shuffle(&data, 4, 0.5).unwrap();
        assert_eq!(a, a2);
        assert_eq!(b, b2);
        let mut all: Vec<f64> = a.features().iter().chain(b.features()).map(|r| r[0]).collect();
        all.sort_by(f64::total_cmp);
        assert_eq!(all, (0..10).map(|i| i as f64).collect::<Vec<_>>());

        let big = Dataset::from_rows((0..506).map(|i| vec![i as f64]).collect(), vec![0.0; 506], Task::Regression).unwrap();
        assert_eq!(split_shuffle(&big, 0, 0.5).unwrap().1.n_rows(), 253);
    }

    #[test]
    fn split_rejects_empty_side() {
        let data = Dataset::from_rows(vec![vec![1.0], vec![2.0]], vec![0.0; 2], Task::Regression).unwrap();
        assert!(matches!(split_shuffle(&data, 0, 0.1), Err(Error::EmptySplit(_))));
        assert!(matches!(split_shuffle(&data, 0, 1.0), Err(Error::EmptySplit(_))));
    }

    #[test]
    fn dataset_invariants() {
        assert!(Dataset::from_rows(vec![], vec![], Task::Regression).is_err());
        assert!(Dataset::from_rows(vec![vec![1.0]], vec![0.5], Task::Classification).is_err());
        assert!(Dataset::new(vec![vec![0.5]], vec![1.0], vec!["a".into()], vec![true], Task::Regression).is_err());
        assert!(Dataset::from_rows(vec![vec![1.0, 2.0], vec![1.0]], vec![0.0, 0.0], Task::Regression).is_err());
    }
}
