//! Logistic regression trained with full-batch gradient descent.

#[derive(Debug, Clone)]
pub(crate) struct Logistic {
    pub weights: Vec<f64>,
    pub intercept: f64,
}

impl Logistic {
    pub fn score(&self, x: &[f64]) -> f64 {
        self.weights
            .iter()
            .zip(x)
            .fold(self.intercept, |acc, (w, v)| acc + w * v)
    }
}

pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Mean log-loss plus `l2 / 2 * |w|^2` (intercept unpenalised), starting
/// from all-zero parameters.
pub(crate) fn fit(x: &[Vec<f64>], y: &[f64], epochs: usize, learning_rate: f64, l2: f64) -> Logistic {
    let m = x.first().map_or(0, Vec::len);
    let n = x.len() as f64;
    let mut model = Logistic {
        weights: vec![0.0; m],
        intercept: 0.0,
    };
    let mut grad = vec![0.0; m];
    for _ in 0..epochs {
        grad.iter_mut().for_each(|g| *g = 0.0);
        let mut grad_b = 0.0;
        for (row, &t) in x.iter().zip(y) {
            let err = sigmoid(model.score(row)) - t;
            for (g, v) in grad.iter_mut().zip(row) {
                *g += err * v;
            }
            grad_b += err;
        }
        for (w, g) in model.weights.iter_mut().zip(&grad) {
            *w -= learning_rate * (g / n + l2 * *w);
        }
        model.intercept -= learning_rate * grad_b / n;
    }
    model
}
