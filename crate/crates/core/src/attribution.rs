//! Model-agnostic local feature attributions against a single background
//! input.
//!
//! All methods only ever evaluate the model on *composite* inputs: the
//! explained sample `x` with some coordinates replaced by the background
//! `b`. Writing `f([x_S, b_rest])` for the input that keeps the features in
//! `S` from `x` and takes the rest from `b`:
//!
//! * occlusion: `R_i = f(x) - f([x_{all but i}, b_i])`
//! * subset attribution: `R_{i,S} = f([x_{S+i}, b_rest]) - f([x_S, b_rest])`
//! * baseline Shapley: the mean of `R_{i,S}` over feature orderings, where
//!   `S` is the set of features preceding `i`.
//!
//! Shapley values satisfy local accuracy, `sum_i R_i = f(x) - f(b)`, for
//! every ordering set; for a linear model every method reduces to
//! `w_i (x_i - b_i)`.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::dataset::{Background, LinearGroundTruth, Link};
use crate::error::{Error, Result};
use crate::models::Predictor;

/// Largest feature count accepted by [`shap_exact`].
pub const EXACT_FEATURE_LIMIT: usize = 10;

/// Largest feature count for which subset evaluations are memoised.
const MEMO_FEATURE_LIMIT: usize = 20;

/// Per-feature attribution values, possibly partial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Attribution {
    pub values: Vec<f64>,
    pub available: Vec<bool>,
}

impl Attribution {
    pub fn full(values: Vec<f64>) -> Self {
        let available = vec![true; values.len()];
        Self { values, available }
    }

    pub fn zeros(m: usize) -> Self {
        Self::full(vec![0.0; m])
    }

    /// Partial attribution from an index -> value map.
    pub fn from_map(m: usize, map: &BTreeMap<usize, f64>) -> Result<Self> {
        let mut values = vec![0.0; m];
        let mut available = vec![false; m];
        for (&i, &v) in map {
            if i >= m {
                return Err(Error::FeatureOutOfRange { index: i, features: m });
            }
            values[i] = v;
            available[i] = true;
        }
        Ok(Self { values, available })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.available.iter().all(|&a| a)
    }

    pub fn get(&self, i: usize) -> Option<f64> {
        self.available
            .get(i)
            .copied()
            .filter(|&a| a)
            .map(|_| self.values[i])
    }

    /// Available `(index, value)` pairs in index order.
    pub fn iter_available(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.values
            .iter()
            .zip(&self.available)
            .enumerate()
            .filter(|(_, (_, &a))| a)
            .map(|(i, (&v, _))| (i, v))
    }

    pub fn to_map(&self) -> BTreeMap<usize, f64> {
        self.iter_available().collect()
    }

    /// Sum over available entries.
    pub fn sum(&self) -> f64 {
        self.iter_available().map(|(_, v)| v).sum()
    }
}

fn check_inputs<P: Predictor + ?Sized>(model: &P, x: &[f64], b: &Background) -> Result<usize> {
    let m = model.n_features();
    crate::models::check_dims(m, x.len())?;
    b.check(m)?;
    Ok(m)
}

/// `[x_S, b_rest]` for the subset encoded by `keep`.
fn composite(x: &[f64], b: &[f64], keep: impl Fn(usize) -> bool) -> Vec<f64> {
    (0..x.len()).map(|i| if keep(i) { x[i] } else { b[i] }).collect()
}

pub fn occlusion<P: Predictor + ?Sized>(model: &P, x: &[f64], b: &Background) -> Result<Attribution> {
    let m = check_inputs(model, x, b)?;
    let fx = model.output(x);
    let mut z = x.to_vec();
    let values = (0..m)
        .map(|i| {
            z[i] = b.values[i];
            let r = fx - model.output(&z);
            z[i] = x[i];
            r
        })
        .collect();
    Ok(Attribution::full(values))
}

/// Contribution of feature `i` when it joins the known set `s`.
pub fn subset_attribution<P: Predictor + ?Sized>(
    model: &P,
    x: &[f64],
    b: &Background,
    i: usize,
    s: &[usize],
) -> Result<f64> {
    let m = check_inputs(model, x, b)?;
    if i >= m {
        return Err(Error::FeatureOutOfRange { index: i, features: m });
    }
    if let Some(&bad) = s.iter().find(|&&j| j >= m) {
        return Err(Error::FeatureOutOfRange { index: bad, features: m });
    }
    if s.contains(&i) {
        return Err(Error::InvalidArgument(format!("feature {i} is already in the subset")));
    }
    let without = composite(x, &b.values, |j| s.contains(&j));
    let with = composite(x, &b.values, |j| j == i || s.contains(&j));
    Ok(model.output(&with) - model.output(&without))
}

/// Evaluates `f([x_S, b_rest])` by subset bitmask, memoising when small.
struct SubsetEval<'a, P: ?Sized> {
    model: &'a P,
    x: &'a [f64],
    b: &'a [f64],
    memo: Option<Vec<Option<f64>>>,
}

impl<'a, P: Predictor + ?Sized> SubsetEval<'a, P> {
    fn new(model: &'a P, x: &'a [f64], b: &'a [f64]) -> Self {
        let m = x.len();
        let memo = (m <= MEMO_FEATURE_LIMIT).then(|| vec![None; 1 << m]);
        Self { model, x, b, memo }
    }

    fn eval(&mut self, mask: u64, z: &[f64]) -> f64 {
        match &mut self.memo {
            Some(memo) => *memo[mask as usize].get_or_insert_with(|| self.model.output(z)),
            None => self.model.output(z),
        }
    }

    /// Adds the marginal contribution of every feature along `order` into
    /// `acc`.
    fn accumulate(&mut self, order: &[usize], acc: &mut [f64]) {
        let mut z = self.b.to_vec();
        let mut mask = 0u64;
        let mut prev = self.eval(mask, &z);
        for &i in order {
            z[i] = self.x[i];
            mask |= 1 << i;
            let cur = self.eval(mask, &z);
            acc[i] += cur - prev;
            prev = cur;
        }
    }
}

fn check_ordering(order: &[usize], m: usize) -> Result<()> {
    let mut seen = vec![false; m];
    if order.len() != m {
        return Err(Error::InvalidArgument(format!(
            "ordering has {} entries for {m} features",
            order.len()
        )));
    }
    for &i in order {
        if i >= m || std::mem::replace(&mut seen[i], true) {
            return Err(Error::InvalidArgument(format!("{order:?} is not a permutation")));
        }
    }
    Ok(())
}

/// Shapley values averaged over the given feature orderings.
pub fn shap_from_orderings<P, I, O>(model: &P, x: &[f64], b: &Background, orderings: I) -> Result<Attribution>
where
    P: Predictor + ?Sized,
    I: IntoIterator<Item = O>,
    O: AsRef<[usize]>,
{
    let m = check_inputs(model, x, b)?;
    if m > 64 {
        return Err(Error::InvalidArgument("at most 64 features are supported".into()));
    }
    let mut eval = SubsetEval::new(model, x, &b.values);
    let mut acc = vec![0.0; m];
    let mut count = 0usize;
    for order in orderings {
        let order = order.as_ref();
        check_ordering(order, m)?;
        eval.accumulate(order, &mut acc);
        count += 1;
    }
    if count == 0 {
        return Err(Error::InvalidArgument("no orderings given".into()));
    }
    if m == 1 {
        // every ordering is the same; avoid rounding in the average
        let mut single = vec![0.0];
        eval.accumulate(&[0], &mut single);
        return Ok(Attribution::full(single));
    }
    let n = count as f64;
    Ok(Attribution::full(acc.into_iter().map(|a| a / n).collect()))
}

/// Default number of sampled orderings: `2 * M * 10`.
pub fn default_permutations(m: usize) -> usize {
    20 * m.max(1)
}

/// Monte-Carlo baseline Shapley values from `n_perms` uniformly random
/// orderings.
pub fn shap_permutation<P, R>(
    model: &P,
    x: &[f64],
    b: &Background,
    n_perms: usize,
    rng: &mut R,
) -> Result<Attribution>
where
    P: Predictor + ?Sized,
    R: rand::Rng + ?Sized,
{
    if n_perms == 0 {
        return Err(Error::InvalidArgument("n_perms must be at least 1".into()));
    }
    let m = model.n_features();
    let orderings: Vec<Vec<usize>> = (0..n_perms)
        .map(|_| {
            let mut p: Vec<usize> = (0..m).collect();
            p.shuffle(rng);
            p
        })
        .collect();
    shap_from_orderings(model, x, b, orderings)
}

/// All orderings of `0..m` in lexicographic order.
pub fn all_orderings(m: usize) -> impl Iterator<Item = Vec<usize>> {
    let mut next = Some((0..m).collect::<Vec<_>>());
    std::iter::from_fn(move || {
        let current = next.take()?;
        let mut p = current.clone();
        // standard next-permutation step
        if let Some(k) = (1..p.len()).rev().find(|&k| p[k - 1] < p[k]) {
            let k = k - 1;
            let l = (k + 1..p.len()).rev().find(|&l| p[k] < p[l]).expect("pivot has a successor");
            p.swap(k, l);
            p[k + 1..].reverse();
            next = Some(p);
        }
        Some(current)
    })
}

/// Exact baseline Shapley values by enumerating all `M!` orderings.
pub fn shap_exact<P: Predictor + ?Sized>(model: &P, x: &[f64], b: &Background) -> Result<Attribution> {
    let m = check_inputs(model, x, b)?;
    if m > EXACT_FEATURE_LIMIT {
        return Err(Error::TooManyFeatures(m));
    }
    shap_from_orderings(model, x, b, all_orderings(m))
}

/// `R_i = w_i (x_i - b_i)`, the attribution every method assigns to a
/// linear model.
pub fn linear_closed_form(gt: &LinearGroundTruth, x: &[f64], b: &Background) -> Result<Attribution> {
    if gt.link != Link::Identity {
        return Err(Error::InvalidArgument("closed form needs an identity link".into()));
    }
    let m = gt.weights.len();
    crate::models::check_dims(m, x.len())?;
    b.check(m)?;
    Ok(Attribution::full(
        gt.weights
            .iter()
            .zip(x.iter().zip(&b.values))
            .map(|(w, (xi, bi))| w * (xi - bi))
            .collect(),
    ))
}
