//! One-hidden-layer ReLU network trained with plain SGD (batch size 1).
//!
//! Inputs are standardised with training statistics; regression targets are
//! standardised too and mapped back on output.

#![allow(clippy::needless_range_loop)]

use rand::seq::SliceRandom;
use rand::Rng;

use crate::dataset::Task;
use crate::rng::{self, stream};

#[derive(Debug, Clone)]
pub(crate) struct Mlp {
    mean: Vec<f64>,
    scale: Vec<f64>,
    target_mean: f64,
    target_scale: f64,
    /// hidden x inputs
    w1: Vec<Vec<f64>>,
    b1: Vec<f64>,
    w2: Vec<f64>,
    b2: f64,
}

impl Mlp {
    fn forward(&self, z: &[f64], hidden: &mut [f64]) -> f64 {
        for (h, (w, b)) in hidden.iter_mut().zip(self.w1.iter().zip(&self.b1)) {
            let a = w.iter().zip(z).fold(*b, |acc, (wi, zi)| acc + wi * zi);
            *h = a.max(0.0);
        }
        hidden.iter().zip(&self.w2).fold(self.b2, |acc, (h, w)| acc + h * w)
    }

    fn standardise(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.mean.iter().zip(&self.scale))
            .map(|(v, (m, s))| (v - m) / s)
            .collect()
    }

    /// Regression output in target units, or the logit for classification.
    pub fn raw(&self, x: &[f64]) -> f64 {
        let z = self.standardise(x);
        let mut hidden = vec![0.0; self.b1.len()];
        let out = self.forward(&z, &mut hidden);
        out * self.target_scale + self.target_mean
    }
}

fn mean_and_scale(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = values.clone().count() as f64;
    let mean = values.clone().sum::<f64>() / n;
    let var = values.map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let sd = var.sqrt();
    (mean, if sd > 1e-12 { sd } else { 1.0 })
}

pub(crate) fn fit(
    x: &[Vec<f64>],
    y: &[f64],
    task: Task,
    hidden: usize,
    epochs: usize,
    learning_rate: f64,
    seed: u64,
) -> Mlp {
    let m = x.first().map_or(0, Vec::len);
    let (mean, scale): (Vec<f64>, Vec<f64>) = (0..m)
        .map(|c| mean_and_scale(x.iter().map(move |r| r[c])))
        .unzip();
    let (target_mean, target_scale) = match task {
        Task::Regression => mean_and_scale(y.iter().copied()),
        Task::Classification => (0.0, 1.0),
    };

    let mut rng = rng::rng_from(seed, &[stream::MODEL]);
    let mut net = Mlp {
        mean,
        scale,
        target_mean,
        target_scale,
        w1: (0..hidden)
            .map(|_| (0..m).map(|_| rng.random_range(-0.5..=0.5)).collect())
            .collect(),
        b1: vec![0.0; hidden],
        w2: (0..hidden).map(|_| rng.random_range(-0.5..=0.5)).collect(),
        b2: 0.0,
    };

    let inputs: Vec<Vec<f64>> = x.iter().map(|r| net.standardise(r)).collect();
    let targets: Vec<f64> = y.iter().map(|t| (t - target_mean) / target_scale).collect();
    let mut order: Vec<usize> = (0..x.len()).collect();
    let mut h = vec![0.0; hidden];
    for _ in 0..epochs {
        order.shuffle(&mut rng);
        for &i in &order {
            let z = &inputs[i];
            let out = net.forward(z, &mut h);
            // d loss / d out for squared error and for sigmoid + log-loss
            let delta = match task {
                Task::Regression => out - targets[i],
                Task::Classification => super::logistic::sigmoid(out) - targets[i],
            };
            for j in 0..hidden {
                let back = if h[j] > 0.0 { delta * net.w2[j] } else { 0.0 };
                net.w2[j] -= learning_rate * delta * h[j];
                if back != 0.0 {
                    for (w, zi) in net.w1[j].iter_mut().zip(z) {
                        *w -= learning_rate * back * zi;
                    }
                    net.b1[j] -= learning_rate * back;
                }
            }
            net.b2 -= learning_rate * delta;
        }
    }
    net
}
