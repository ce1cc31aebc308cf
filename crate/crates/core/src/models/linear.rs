//! Ordinary least squares through the normal equations.

#![allow(clippy::needless_range_loop)]

#[derive(Debug, Clone)]
pub(crate) struct Linear {
    pub weights: Vec<f64>,
    pub intercept: f64,
}

impl Linear {
    pub fn score(&self, x: &[f64]) -> f64 {
        self.weights
            .iter()
            .zip(x)
            .fold(self.intercept, |acc, (w, v)| acc + w * v)
    }
}

/// Relative pivot size below which the Gram matrix is treated as singular.
const PIVOT_TOLERANCE: f64 = 1e-12;

/// Cholesky factorisation of a symmetric matrix, or `None` when a pivot is
/// not safely positive.
fn cholesky(a: &[Vec<f64>]) -> Option<Vec<Vec<f64>>> {
    let n = a.len();
    let scale = (0..n).map(|i| a[i][i].abs()).fold(0.0, f64::max).max(1.0);
    let mut l = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..=i {
            let dot: f64 = (0..j).map(|k| l[i][k] * l[j][k]).sum();
            if i == j {
                let d = a[i][i] - dot;
                if d <= PIVOT_TOLERANCE * scale {
                    return None;
                }
                l[i][i] = d.sqrt();
            } else {
                l[i][j] = (a[i][j] - dot) / l[j][j];
            }
        }
    }
    Some(l)
}

fn solve_cholesky(l: &[Vec<f64>], b: &[f64]) -> Vec<f64> {
    let n = l.len();
    let mut z = vec![0.0; n];
    for i in 0..n {
        let dot: f64 = (0..i).map(|k| l[i][k] * z[k]).sum();
        z[i] = (b[i] - dot) / l[i][i];
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let dot: f64 = (i + 1..n).map(|k| l[k][i] * x[k]).sum();
        x[i] = (z[i] - dot) / l[i][i];
    }
    x
}

/// Least squares with an intercept. A singular Gram matrix gets `ridge`
/// added to its diagonal (growing tenfold until the factorisation succeeds).
pub(crate) fn fit(x: &[Vec<f64>], y: &[f64], ridge: f64) -> Linear {
    let m = x.first().map_or(0, Vec::len);
    let n = m + 1;
    let mut gram = vec![vec![0.0; n]; n];
    let mut rhs = vec![0.0; n];
    for (row, &t) in x.iter().zip(y) {
        let design = |k: usize| if k < m { row[k] } else { 1.0 };
        for i in 0..n {
            let di = design(i);
            rhs[i] += di * t;
            for j in 0..=i {
                gram[i][j] += di * design(j);
            }
        }
    }
    for i in 0..n {
        for j in 0..i {
            gram[j][i] = gram[i][j];
        }
    }

    let mut lambda = 0.0;
    let factor = loop {
        let mut a = gram.clone();
        for (i, row) in a.iter_mut().enumerate() {
            row[i] += lambda;
        }
        if let Some(l) = cholesky(&a) {
            break l;
        }
        lambda = if lambda == 0.0 { ridge.max(f64::MIN_POSITIVE) } else { lambda * 10.0 };
    };
    let mut beta = solve_cholesky(&factor, &rhs);
    let intercept = beta.pop().unwrap_or(0.0);
    Linear {
        weights: beta,
        intercept,
    }
}
