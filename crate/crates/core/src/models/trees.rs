//! Gradient-boosted regression trees.
//!
//! Regression boosts least-squares residuals from the target mean.
//! Classification boosts the logistic loss from the prior log-odds, with
//! Newton leaf values `sum(r) / sum(p (1 - p))`. Trees are grown greedily to
//! a fixed depth using the squared-error split criterion on the residuals.

use crate::dataset::Task;

use super::logistic::sigmoid;

#[derive(Debug, Clone)]
pub(crate) struct Params {
    pub n_trees: usize,
    pub max_depth: usize,
    pub learning_rate: f64,
    pub min_samples_leaf: usize,
}

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Leaf(f64),
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

/// A binary regression tree; `x[feature] <= threshold` goes left.
#[derive(Debug, Clone, PartialEq)]
pub struct Tree {
    nodes: Vec<Node>,
}

impl Tree {
    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut at = 0;
        loop {
            match self.nodes[at] {
                Node::Leaf(v) => return v,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => at = if x[feature] <= threshold { left } else { right },
            }
        }
    }

    /// Features used by at least one split.
    pub fn split_features(&self) -> impl Iterator<Item = usize> + '_ {
        self.nodes.iter().filter_map(|n| match n {
            Node::Split { feature, .. } => Some(*feature),
            Node::Leaf(_) => None,
        })
    }
}

#[derive(Debug, Clone)]
pub struct Forest {
    init: f64,
    learning_rate: f64,
    trees: Vec<Tree>,
}

impl Forest {
    pub(crate) fn raw(&self, x: &[f64]) -> f64 {
        self.trees
            .iter()
            .fold(self.init, |acc, t| acc + self.learning_rate * t.predict(x))
    }

    pub fn trees(&self) -> &[Tree] {
        &self.trees
    }

    /// Raw scores using only the first `k` trees.
    pub fn raw_partial(&self, x: &[f64], k: usize) -> f64 {
        self.trees[..k.min(self.trees.len())]
            .iter()
            .fold(self.init, |acc, t| acc + self.learning_rate * t.predict(x))
    }

    pub fn uses_feature(&self, feature: usize) -> bool {
        self.trees.iter().any(|t| t.split_features().any(|f| f == feature))
    }
}

struct Builder<'a> {
    x: &'a [Vec<f64>],
    residual: &'a [f64],
    hessian: Option<&'a [f64]>,
    params: &'a Params,
    nodes: Vec<Node>,
}

struct BestSplit {
    feature: usize,
    threshold: f64,
    gain: f64,
}

impl Builder<'_> {
    fn leaf_value(&self, idx: &[usize]) -> f64 {
        let sum: f64 = idx.iter().map(|&i| self.residual[i]).sum();
        match self.hessian {
            None => sum / idx.len() as f64,
            Some(h) => {
                let denom: f64 = idx.iter().map(|&i| h[i]).sum();
                if denom.abs() < 1e-150 {
                    0.0
                } else {
                    sum / denom
                }
            }
        }
    }

    fn best_split(&self, idx: &[usize]) -> Option<BestSplit> {
        let n = idx.len();
        let min_leaf = self.params.min_samples_leaf.max(1);
        if n < 2 * min_leaf {
            return None;
        }
        let total: f64 = idx.iter().map(|&i| self.residual[i]).sum();
        let base = total * total / n as f64;
        let m = self.x[idx[0]].len();
        let mut best: Option<BestSplit> = None;
        let mut sorted = idx.to_vec();
        for feature in 0..m {
            sorted.sort_by(|&a, &b| self.x[a][feature].total_cmp(&self.x[b][feature]).then(a.cmp(&b)));
            let mut left_sum = 0.0;
            for k in 0..n - 1 {
                left_sum += self.residual[sorted[k]];
                let lo = self.x[sorted[k]][feature];
                let hi = self.x[sorted[k + 1]][feature];
                let n_left = k + 1;
                if lo == hi || n_left < min_leaf || n - n_left < min_leaf {
                    continue;
                }
                let right_sum = total - left_sum;
                let gain = left_sum * left_sum / n_left as f64
                    + right_sum * right_sum / (n - n_left) as f64
                    - base;
                if gain > best.as_ref().map_or(1e-12, |b| b.gain) {
                    let mid = lo + (hi - lo) / 2.0;
                    let threshold = if mid < hi { mid } else { lo };
                    best = Some(BestSplit {
                        feature,
                        threshold,
                        gain,
                    });
                }
            }
        }
        best
    }

    fn grow(&mut self, idx: &[usize], depth: usize) -> usize {
        let at = self.nodes.len();
        self.nodes.push(Node::Leaf(0.0));
        let split = if depth < self.params.max_depth {
            self.best_split(idx)
        } else {
            None
        };
        match split {
            None => self.nodes[at] = Node::Leaf(self.leaf_value(idx)),
            Some(s) => {
                let (l, r): (Vec<usize>, Vec<usize>) = idx
                    .iter()
                    .partition(|&&i| self.x[i][s.feature] <= s.threshold);
                let left = self.grow(&l, depth + 1);
                let right = self.grow(&r, depth + 1);
                self.nodes[at] = Node::Split {
                    feature: s.feature,
                    threshold: s.threshold,
                    left,
                    right,
                };
            }
        }
        at
    }
}

pub(crate) fn fit(x: &[Vec<f64>], y: &[f64], task: Task, params: &Params) -> Forest {
    let n = y.len() as f64;
    let init = match task {
        Task::Regression => y.iter().sum::<f64>() / n,
        Task::Classification => {
            let p = (y.iter().sum::<f64>() / n).clamp(1e-12, 1.0 - 1e-12);
            (p / (1.0 - p)).ln()
        }
    };
    let mut raw = vec![init; y.len()];
    let all: Vec<usize> = (0..y.len()).collect();
    let mut trees = Vec::with_capacity(params.n_trees);
    for _ in 0..params.n_trees {
        let (residual, hessian): (Vec<f64>, Option<Vec<f64>>) = match task {
            Task::Regression => (y.iter().zip(&raw).map(|(t, f)| t - f).collect(), None),
            Task::Classification => {
                let p: Vec<f64> = raw.iter().map(|&f| sigmoid(f)).collect();
                (
                    y.iter().zip(&p).map(|(t, q)| t - q).collect(),
                    Some(p.iter().map(|q| q * (1.0 - q)).collect()),
                )
            }
        };
        let mut builder = Builder {
            x,
            residual: &residual,
            hessian: hessian.as_deref(),
            params,
            nodes: Vec::new(),
        };
        builder.grow(&all, 0);
        let tree = Tree {
            nodes: builder.nodes,
        };
        for (f, row) in raw.iter_mut().zip(x) {
            *f += params.learning_rate * tree.predict(row);
        }
        trees.push(tree);
    }
    Forest {
        init,
        learning_rate: params.learning_rate,
        trees,
    }
}
