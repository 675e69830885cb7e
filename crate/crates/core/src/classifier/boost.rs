//! Gradient-boosted regression trees with logistic loss (second-order leaf
//! values, L2-regularised like XGBoost). Depth-1 trees are plain stumps.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoostConfig {
    pub n_estimators: usize,
    pub learning_rate: f64,
    pub max_depth: usize,
    /// L2 penalty on leaf values.
    pub lambda: f64,
    /// Minimum hessian mass per child.
    pub min_child_weight: f64,
    pub seed: u64,
}

impl Default for BoostConfig {
    fn default() -> Self {
        Self {
            n_estimators: 200,
            learning_rate: 0.3,
            max_depth: 6,
            lambda: 1.0,
            min_child_weight: 1e-3,
            seed: 1,
        }
    }
}

impl BoostConfig {
    pub fn stumps(n_estimators: usize, learning_rate: f64) -> Self {
        Self {
            n_estimators,
            learning_rate,
            max_depth: 1,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Node {
    Leaf {
        value: f64,
    },
    /// `x[feature] < threshold` goes left.
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

/// A regression tree stored as a node arena; node 0 is the root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn eval(&self, x: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Leaf { value } => return value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if x[feature] < threshold { left } else { right },
            }
        }
    }

    /// `(feature, threshold, left value, right value)` when the tree is a stump.
    pub fn as_stump(&self) -> Option<(usize, f64, f64, f64)> {
        match self.nodes.as_slice() {
            [Node::Split {
                feature,
                threshold,
                left,
                right,
            }, ..] => match (&self.nodes[*left], &self.nodes[*right]) {
                (Node::Leaf { value: l }, Node::Leaf { value: r }) => Some((*feature, *threshold, *l, *r)),
                _ => None,
            },
            _ => None,
        }
    }

    fn scale_leaves(&mut self, factor: f64) {
        for n in &mut self.nodes {
            if let Node::Leaf { value } = n {
                *value *= factor;
            }
        }
    }
}

/// Additive ensemble: `p = sigmoid(base_score + learning_rate * sum(tree(x)))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoostedEnsemble {
    pub trees: Vec<Tree>,
    pub learning_rate: f64,
    pub n_estimators: usize,
    pub base_score: f64,
    pub n_features: usize,
    /// Mean logistic loss on the training rows after each stage.
    pub train_loss: Vec<f64>,
    pub train_accuracy: f64,
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

fn logistic_loss(margins: &[f64], labels: &[u8]) -> f64 {
    margins
        .iter()
        .zip(labels)
        .map(|(m, &y)| {
            // log(1 + e^m) - y m, computed stably
            let softplus = if *m > 0.0 { m + (-m).exp().ln_1p() } else { m.exp().ln_1p() };
            softplus - f64::from(y) * m
        })
        .sum::<f64>()
        / margins.len() as f64
}

struct Grower<'a> {
    rows: &'a [Vec<f64>],
    grad: &'a [f64],
    hess: &'a [f64],
    cfg: &'a BoostConfig,
    nodes: Vec<Node>,
}

impl Grower<'_> {
    fn leaf_value(&self, idx: &[usize]) -> f64 {
        let g: f64 = idx.iter().map(|&i| self.grad[i]).sum();
        let h: f64 = idx.iter().map(|&i| self.hess[i]).sum();
        -g / (h + self.cfg.lambda)
    }

    fn best_split(&self, idx: &[usize]) -> Option<(usize, f64, f64)> {
        let lambda = self.cfg.lambda;
        let g_total: f64 = idx.iter().map(|&i| self.grad[i]).sum();
        let h_total: f64 = idx.iter().map(|&i| self.hess[i]).sum();
        let parent = g_total * g_total / (h_total + lambda);
        let mut best: Option<(usize, f64, f64)> = None;
        let mut order = idx.to_vec();
        for f in 0..self.rows[0].len() {
            order.sort_by(|&a, &b| self.rows[a][f].total_cmp(&self.rows[b][f]).then(a.cmp(&b)));
            let (mut gl, mut hl) = (0.0, 0.0);
            for k in 0..order.len() - 1 {
                let i = order[k];
                gl += self.grad[i];
                hl += self.hess[i];
                let (v, next) = (self.rows[i][f], self.rows[order[k + 1]][f]);
                if v == next {
                    continue;
                }
                let (gr, hr) = (g_total - gl, h_total - hl);
                if hl < self.cfg.min_child_weight || hr < self.cfg.min_child_weight {
                    continue;
                }
                let gain = 0.5 * (gl * gl / (hl + lambda) + gr * gr / (hr + lambda) - parent);
                if gain > 1e-12 && best.is_none_or(|(_, _, g)| gain > g) {
                    best = Some((f, v + (next - v) / 2.0, gain));
                }
            }
        }
        best
    }

    fn grow(&mut self, idx: Vec<usize>, depth: usize) -> usize {
        let slot = self.nodes.len();
        self.nodes.push(Node::Leaf {
            value: self.leaf_value(&idx),
        });
        if depth >= self.cfg.max_depth || idx.len() < 2 {
            return slot;
        }
        let Some((feature, threshold, _)) = self.best_split(&idx) else {
            return slot;
        };
        let (l, r): (Vec<usize>, Vec<usize>) = idx.into_iter().partition(|&i| self.rows[i][feature] < threshold);
        let left = self.grow(l, depth + 1);
        let right = self.grow(r, depth + 1);
        self.nodes[slot] = Node::Split {
            feature,
            threshold,
            left,
            right,
        };
        slot
    }
}

/// Stage-wise fit minimising mean logistic loss. A stage whose tree would
/// raise the training loss has its leaves halved until it does not.
pub fn fit_boosted(features: &[Vec<f64>], labels: &[u8], cfg: &BoostConfig) -> Result<BoostedEnsemble> {
    if features.len() < 2 || features.len() != labels.len() {
        return Err(Error::Fit(format!(
            "need at least 2 labelled rows, got {} rows and {} labels",
            features.len(),
            labels.len()
        )));
    }
    let d = features[0].len();
    if d == 0 || features.iter().any(|r| r.len() != d) {
        return Err(Error::Fit("feature rows must share a non-zero length".into()));
    }
    if features.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::Fit("features must be finite".into()));
    }
    let positives = labels.iter().filter(|&&y| y == 1).count();
    if positives == 0 || positives == labels.len() {
        return Err(Error::Fit("both classes must be present".into()));
    }
    if !(cfg.learning_rate > 0.0 && cfg.lambda >= 0.0) {
        return Err(Error::Fit("learning rate must be positive and lambda non-negative".into()));
    }

    let prior = positives as f64 / labels.len() as f64;
    let base_score = (prior / (1.0 - prior)).ln();
    let mut margins = vec![base_score; labels.len()];
    let mut loss = logistic_loss(&margins, labels);
    let mut trees = Vec::with_capacity(cfg.n_estimators);
    let mut train_loss = Vec::with_capacity(cfg.n_estimators);

    for _ in 0..cfg.n_estimators {
        let probs: Vec<f64> = margins.iter().map(|m| sigmoid(*m)).collect();
        let grad: Vec<f64> = probs.iter().zip(labels).map(|(p, &y)| p - f64::from(y)).collect();
        let hess: Vec<f64> = probs.iter().map(|p| (p * (1.0 - p)).max(1e-16)).collect();
        let mut grower = Grower {
            rows: features,
            grad: &grad,
            hess: &hess,
            cfg,
            nodes: Vec::new(),
        };
        grower.grow((0..labels.len()).collect(), 0);
        let mut tree = Tree { nodes: grower.nodes };

        let outputs: Vec<f64> = features.iter().map(|x| tree.eval(x)).collect();
        let mut factor = 1.0;
        let mut accepted = None;
        for _ in 0..30 {
            let trial: Vec<f64> = margins
                .iter()
                .zip(&outputs)
                .map(|(m, o)| m + cfg.learning_rate * factor * o)
                .collect();
            let trial_loss = logistic_loss(&trial, labels);
            if trial_loss <= loss {
                accepted = Some((trial, trial_loss));
                break;
            }
            factor *= 0.5;
        }
        match accepted {
            Some((trial, trial_loss)) => {
                if factor != 1.0 {
                    tree.scale_leaves(factor);
                }
                margins = trial;
                loss = trial_loss;
            }
            None => tree = Tree {
                nodes: vec![Node::Leaf { value: 0.0 }],
            },
        }
        trees.push(tree);
        train_loss.push(loss);
    }

    let correct = margins
        .iter()
        .zip(labels)
        .filter(|(m, &y)| (**m >= 0.0) == (y == 1))
        .count();
    Ok(BoostedEnsemble {
        trees,
        learning_rate: cfg.learning_rate,
        n_estimators: cfg.n_estimators,
        base_score,
        n_features: d,
        train_loss,
        train_accuracy: correct as f64 / labels.len() as f64,
    })
}

impl BoostedEnsemble {
    fn check(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.n_features {
            return Err(Error::contract(format!(
                "classifier expects {} features, got {}",
                self.n_features,
                x.len()
            )));
        }
        Ok(())
    }

    /// Member probability for one row.
    pub fn predict_proba(&self, x: &[f64]) -> Result<f64> {
        self.check(x)?;
        let mut margin = self.base_score;
        for tree in &self.trees {
            margin += self.learning_rate * tree.eval(x);
        }
        Ok(sigmoid(margin))
    }

    /// Member probabilities for many rows, accumulated tree by tree.
    pub fn predict_proba_batch(&self, rows: &[Vec<f64>]) -> Result<Vec<f64>> {
        for r in rows {
            self.check(r)?;
        }
        let mut margins = vec![self.base_score; rows.len()];
        for tree in &self.trees {
            for (m, r) in margins.iter_mut().zip(rows) {
                *m += self.learning_rate * tree.eval(r);
            }
        }
        Ok(margins.into_iter().map(sigmoid).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn separable_1d_fits_with_few_stumps() {
        let rows: Vec<Vec<f64>> = (0..20).map(|i| vec![i as f64]).collect();
        let labels: Vec<u8> = (0..20).map(|i| u8::from(i < 10)).collect();
        let m = fit_boosted(&rows, &labels, &BoostConfig::stumps(5, 0.3)).unwrap();
        assert_eq!(m.train_accuracy, 1.0);
        let (f, thr, l, r) = m.trees[0].as_stump().unwrap();
        assert_eq!((f, thr), (0, 9.5));
        assert!(l > 0.0 && r < 0.0);
    }

    #[test]
    fn empty_ensemble_is_prior() {
        let rows = vec![vec![0.0], vec![1.0], vec![2.0], vec![3.0]];
        let labels = vec![1, 0, 0, 0];
        let m = fit_boosted(&rows, &labels, &BoostConfig::stumps(0, 0.1)).unwrap();
        assert!((m.predict_proba(&[5.0]).unwrap() - 0.25).abs() < 1e-12);
    }

    #[test]
    fn single_stump_formula() {
        let m = BoostedEnsemble {
            trees: vec![Tree {
                nodes: vec![
                    Node::Split { feature: 1, threshold: 0.5, left: 1, right: 2 },
                    Node::Leaf { value: 2.0 },
                    Node::Leaf { value: -1.0 },
                ],
            }],
            learning_rate: 0.1,
            n_estimators: 1,
            base_score: 0.3,
            n_features: 2,
            train_loss: vec![],
            train_accuracy: 0.0,
        };
        let p = m.predict_proba(&[9.0, 0.2]).unwrap();
        assert_eq!(p, sigmoid(0.3 + 0.1 * 2.0));
        assert!(m.predict_proba(&[0.0]).is_err());
    }

    #[test]
    fn single_class_rejected() {
        let rows = vec![vec![0.0], vec![1.0]];
        assert!(matches!(fit_boosted(&rows, &[1, 1], &BoostConfig::default()), Err(Error::Fit(_))));
    }
}
