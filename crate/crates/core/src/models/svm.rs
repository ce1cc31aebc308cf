//! RBF-kernel SVM trained with kernelised Pegasos subgradient steps.
//!
//! The kernel is `exp(-gamma |a - b|^2) + 1`; the constant term plays the
//! role of a bias. `gamma` defaults to `1 / (M * mean feature variance)` and
//! the regularisation strength is `1 / N`.

use rand::Rng;

use crate::rng::{self, stream};

#[derive(Debug, Clone)]
pub(crate) struct Svm {
    support: Vec<Vec<f64>>,
    /// `alpha_j * y_j / (lambda * T)`, folded so scoring is a single sum.
    coef: Vec<f64>,
    gamma: f64,
}

fn kernel(gamma: f64, a: &[f64], b: &[f64]) -> f64 {
    let d2: f64 = a.iter().zip(b).map(|(u, v)| (u - v) * (u - v)).sum();
    (-gamma * d2).exp() + 1.0
}

impl Svm {
    pub fn score(&self, x: &[f64]) -> f64 {
        self.support
            .iter()
            .zip(&self.coef)
            .map(|(s, c)| c * kernel(self.gamma, s, x))
            .sum()
    }
}

fn default_gamma(x: &[Vec<f64>]) -> f64 {
    let m = x[0].len();
    let n = x.len() as f64;
    let total_var: f64 = (0..m)
        .map(|c| {
            let mean = x.iter().map(|r| r[c]).sum::<f64>() / n;
            x.iter().map(|r| (r[c] - mean).powi(2)).sum::<f64>() / n
        })
        .sum();
    // 1 / (M * mean variance) == 1 / total variance
    if total_var > 1e-12 {
        1.0 / total_var
    } else {
        1.0
    }
}

pub(crate) fn fit(x: &[Vec<f64>], y: &[f64], epochs: usize, gamma: Option<f64>, seed: u64) -> Svm {
    let n = x.len();
    let gamma = gamma.unwrap_or_else(|| default_gamma(x));
    let labels: Vec<f64> = y.iter().map(|&t| if t == 1.0 { 1.0 } else { -1.0 }).collect();
    let gram: Vec<Vec<f64>> = x
        .iter()
        .map(|a| x.iter().map(|b| kernel(gamma, a, b)).collect())
        .collect();
    let lambda = 1.0 / n as f64;
    let steps = epochs * n;
    let mut alpha = vec![0u64; n];
    let mut rng = rng::rng_from(seed, &[stream::MODEL]);
    for t in 1..=steps {
        let i = rng.random_range(0..n);
        let s: f64 = (0..n)
            .filter(|&j| alpha[j] != 0)
            .map(|j| alpha[j] as f64 * labels[j] * gram[i][j])
            .sum();
        if labels[i] * s / (lambda * t as f64) < 1.0 {
            alpha[i] += 1;
        }
    }
    let scale = lambda * steps as f64;
    let (support, coef) = x
        .iter()
        .zip(alpha.iter().zip(&labels))
        .filter(|(_, (&a, _))| a != 0)
        .map(|(row, (&a, &l))| (row.clone(), a as f64 * l / scale))
        .unzip();
    Svm {
        support,
        coef,
        gamma,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn separates_two_blobs() {
        let mut x = Vec::new();
        let mut y = Vec::new();
        for i in 0..10 {
            let d = i as f64 * 0.1;
            x.push(vec![-2.0 + d, -2.0]);
            y.push(0.0);
            x.push(vec![2.0 - d, 2.0]);
            y.push(1.0);
        }
        let svm = fit(&x, &y, 200, None, 0);
        for (r, t) in x.iter().zip(&y) {
            assert_eq!(svm.score(r) >= 0.0, *t == 1.0);
        }
    }
}
