//! Random forest classifier: CART trees with Gini impurity, bootstrap
//! sampling, and sqrt(p) feature subsetting. Per-tree seeds derive from the
//! model seed so fitting is reproducible and order-independent.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seeding::rng_for;

const TREE_SEED_TAG: u64 = 0x7266; // "rf"

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MaxFeaturesRule {
    /// Classification convention: auto == sqrt.
    Auto,
    Sqrt,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MaxDepth {
    Unlimited,
    Bounded(usize),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum Node {
    Leaf { prob: f64 },
    Split { feature: usize, threshold: f64, left: usize, right: usize },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn predict(&self, row: &[f64]) -> f64 {
        let mut idx = 0;
        loop {
            match &self.nodes[idx] {
                Node::Leaf { prob } => return *prob,
                Node::Split { feature, threshold, left, right } => {
                    idx = if row[*feature] <= *threshold { *left } else { *right };
                }
            }
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ForestModel {
    pub trees: Vec<Tree>,
    pub n_features: usize,
    /// Impurity-decrease importance, normalized to sum 1 when any split occurred.
    pub importance: Vec<f64>,
    pub n_trees: usize,
    pub max_features: MaxFeaturesRule,
    pub max_depth: MaxDepth,
    pub seed: u64,
}

impl ForestModel {
    pub fn score_row(&self, row: &[f64]) -> f64 {
        let sum: f64 = self.trees.iter().map(|t| t.predict(row)).sum();
        sum / self.trees.len() as f64
    }
}

/// Bootstrap sample for one tree, derived deterministically from the model
/// seed; exposed so tests can regrow a tree's training set independently.
pub fn bootstrap_indices(seed: u64, tree_idx: u64, n: usize) -> Vec<usize> {
    let mut rng = rng_for(seed, &[TREE_SEED_TAG, tree_idx, 0]);
    (0..n).map(|_| rng.gen_range(0..n)).collect()
}

pub fn train_rf(
    x: &[Vec<f64>],
    y: &[u8],
    n_trees: usize,
    max_features: MaxFeaturesRule,
    max_depth: MaxDepth,
    seed: u64,
) -> Result<ForestModel> {
    let pos = y.iter().filter(|&&l| l == 1).count();
    if pos == 0 || pos == y.len() {
        return Err(Error::SingleClass);
    }
    let n = x.len();
    let p = x.first().map_or(0, Vec::len);
    if p == 0 || x.iter().any(|r| r.len() != p) {
        return Err(Error::SchemaMismatch("rows must share a nonempty schema".into()));
    }
    // Both grid rules mean ceil(sqrt(p)) for classification.
    let m_features = match max_features {
        MaxFeaturesRule::Auto | MaxFeaturesRule::Sqrt => (p as f64).sqrt().ceil() as usize,
    };
    let m_features = m_features.clamp(1, p);
    let depth_limit = match max_depth {
        MaxDepth::Unlimited => usize::MAX,
        MaxDepth::Bounded(d) => d,
    };
    let mut trees = Vec::with_capacity(n_trees);
    let mut importance = vec![0.0; p];
    for t in 0..n_trees {
        let indices = bootstrap_indices(seed, t as u64, n);
        let mut rng = rng_for(seed, &[TREE_SEED_TAG, t as u64, 1]);
        let mut builder = TreeBuilder {
            x,
            y,
            m_features,
            depth_limit,
            n_root: indices.len() as f64,
            nodes: Vec::new(),
            importance: &mut importance,
            rng: &mut rng,
            feature_pool: (0..p).collect(),
        };
        builder.grow(indices, 0);
        trees.push(Tree { nodes: builder.nodes });
    }
    let total: f64 = importance.iter().sum();
    if total > 0.0 {
        for v in importance.iter_mut() {
            *v /= total;
        }
    }
    Ok(ForestModel { trees, n_features: p, importance, n_trees, max_features, max_depth, seed })
}

struct TreeBuilder<'a> {
    x: &'a [Vec<f64>],
    y: &'a [u8],
    m_features: usize,
    depth_limit: usize,
    n_root: f64,
    nodes: Vec<Node>,
    importance: &'a mut Vec<f64>,
    rng: &'a mut rand_chacha::ChaCha8Rng,
    feature_pool: Vec<usize>,
}

fn gini(pos: f64, n: f64) -> f64 {
    if n == 0.0 {
        return 0.0;
    }
    let p1 = pos / n;
    let p0 = 1.0 - p1;
    1.0 - p0 * p0 - p1 * p1
}

impl TreeBuilder<'_> {
    /// Grow a node from `samples`; returns its index in the node arena.
    fn grow(&mut self, samples: Vec<usize>, depth: usize) -> usize {
        let n = samples.len() as f64;
        let pos = samples.iter().filter(|&&i| self.y[i] == 1).count() as f64;
        let node_gini = gini(pos, n);
        let make_leaf = node_gini == 0.0 || samples.len() < 2 || depth >= self.depth_limit;
        if make_leaf {
            self.nodes.push(Node::Leaf { prob: pos / n });
            return self.nodes.len() - 1;
        }
        // Sample candidate features without replacement (partial Fisher-Yates).
        let p = self.feature_pool.len();
        for i in 0..self.m_features {
            let j = self.rng.gen_range(i..p);
            self.feature_pool.swap(i, j);
        }
        let candidates: Vec<usize> = self.feature_pool[..self.m_features].to_vec();

        let mut best: Option<(f64, usize, f64)> = None; // (decrease, feature, threshold)
        let mut pairs: Vec<(f64, u8)> = Vec::with_capacity(samples.len());
        for &feat in &candidates {
            pairs.clear();
            pairs.extend(samples.iter().map(|&i| (self.x[i][feat], self.y[i])));
            pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
            let mut left_pos = 0.0;
            for split_at in 1..pairs.len() {
                left_pos += f64::from(pairs[split_at - 1].1);
                if pairs[split_at].0 == pairs[split_at - 1].0 {
                    continue;
                }
                let nl = split_at as f64;
                let nr = n - nl;
                let right_pos = pos - left_pos;
                let weighted = (nl * gini(left_pos, nl) + nr * gini(right_pos, nr)) / n;
                let decrease = node_gini - weighted;
                let better = match best {
                    None => decrease > 0.0,
                    Some((d, _, _)) => decrease > d,
                };
                if better {
                    let threshold = 0.5 * (pairs[split_at - 1].0 + pairs[split_at].0);
                    best = Some((decrease, feat, threshold));
                }
            }
        }
        let Some((decrease, feature, threshold)) = best else {
            self.nodes.push(Node::Leaf { prob: pos / n });
            return self.nodes.len() - 1;
        };
        self.importance[feature] += (n / self.n_root) * decrease;
        let (left_samples, right_samples): (Vec<usize>, Vec<usize>) =
            samples.iter().partition(|&&i| self.x[i][feature] <= threshold);
        let node_idx = self.nodes.len();
        self.nodes.push(Node::Leaf { prob: pos / n }); // placeholder
        let left = self.grow(left_samples, depth + 1);
        let right = self.grow(right_samples, depth + 1);
        self.nodes[node_idx] = Node::Split { feature, threshold, left, right };
        node_idx
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn label_equal_feature_reaches_perfect_training_accuracy() {
        let x: Vec<Vec<f64>> = (0..40).map(|i| vec![f64::from(i % 2)]).collect();
        let y: Vec<u8> = (0..40).map(|i| (i % 2) as u8).collect();
        let m = train_rf(&x, &y, 50, MaxFeaturesRule::Auto, MaxDepth::Unlimited, 5).unwrap();
        for (row, &label) in x.iter().zip(&y) {
            let s = m.score_row(row);
            assert_eq!(u8::from(s >= 0.5), label);
        }
    }

    #[test]
    fn stumps_match_exhaustive_gini_search() {
        let mut rng = rng_for(61, &[0]);
        let n = 60;
        let x: Vec<Vec<f64>> = (0..n).map(|_| vec![rng.gen_range(0.0..1.0)]).collect();
        let y: Vec<u8> = x.iter().map(|r| u8::from(r[0] > 0.45 && r[0] < 0.9)).collect();
        let m = train_rf(&x, &y, 10, MaxFeaturesRule::Sqrt, MaxDepth::Bounded(1), 42).unwrap();
        for (t, tree) in m.trees.iter().enumerate() {
            let indices = bootstrap_indices(42, t as u64, n);
            // Exhaustive oracle over midpoints of the bootstrap sample.
            let mut vals: Vec<(f64, u8)> = indices.iter().map(|&i| (x[i][0], y[i])).collect();
            vals.sort_by(|a, b| a.0.total_cmp(&b.0));
            let total_pos: f64 = vals.iter().map(|&(_, l)| f64::from(l)).sum();
            let nn = vals.len() as f64;
            let parent = gini(total_pos, nn);
            let mut best_decrease = 0.0;
            let mut best_thr = None;
            let mut left_pos = 0.0;
            for s in 1..vals.len() {
                left_pos += f64::from(vals[s - 1].1);
                if vals[s].0 == vals[s - 1].0 {
                    continue;
                }
                let nl = s as f64;
                let weighted = (nl * gini(left_pos, nl) + (nn - nl) * gini(total_pos - left_pos, nn - nl)) / nn;
                let dec = parent - weighted;
                if dec > best_decrease {
                    best_decrease = dec;
                    best_thr = Some(0.5 * (vals[s - 1].0 + vals[s].0));
                }
            }
            match (&tree.nodes[0], best_thr) {
                (Node::Split { threshold, .. }, Some(expect)) => {
                    assert!((threshold - expect).abs() < 1e-12, "tree {t}: {threshold} vs {expect}");
                }
                (Node::Leaf { .. }, None) => {}
                (node, expect) => panic!("tree {t}: {node:?} vs oracle threshold {expect:?}"),
            }
        }
    }

    #[test]
    fn same_seed_same_forest() {
        let mut rng = rng_for(62, &[0]);
        let x: Vec<Vec<f64>> = (0..50)
            .map(|_| (0..6).map(|_| rng.gen_range(0.0..1.0)).collect())
            .collect();
        let y: Vec<u8> = (0..50).map(|i| (i % 2) as u8).collect();
        let a = train_rf(&x, &y, 20, MaxFeaturesRule::Auto, MaxDepth::Bounded(100), 77).unwrap();
        let b = train_rf(&x, &y, 20, MaxFeaturesRule::Auto, MaxDepth::Bounded(100), 77).unwrap();
        let sa: Vec<f64> = x.iter().map(|r| a.score_row(r)).collect();
        let sb: Vec<f64> = x.iter().map(|r| b.score_row(r)).collect();
        assert_eq!(sa, sb);
        assert_eq!(a.importance, b.importance);
    }

    #[test]
    fn importance_sums_to_one() {
        let mut rng = rng_for(63, &[0]);
        let x: Vec<Vec<f64>> = (0..80)
            .map(|_| (0..10).map(|_| rng.gen_range(0.0..1.0)).collect())
            .collect();
        let y: Vec<u8> = x.iter().map(|r| u8::from(r[3] > 0.5)).collect();
        let m = train_rf(&x, &y, 30, MaxFeaturesRule::Sqrt, MaxDepth::Unlimited, 11).unwrap();
        let total: f64 = m.importance.iter().sum();
        assert!((total - 1.0).abs() < 1e-9);
        assert!(m.importance.iter().all(|&v| v >= 0.0));
        // The informative feature dominates.
        let argmax = (0..10).max_by(|&a, &b| m.importance[a].total_cmp(&m.importance[b])).unwrap();
        assert_eq!(argmax, 3);
    }

    #[test]
    fn depth_bound_is_honored() {
        let mut rng = rng_for(64, &[0]);
        let x: Vec<Vec<f64>> = (0..100)
            .map(|_| (0..4).map(|_| rng.gen_range(0.0..1.0)).collect())
            .collect();
        let y: Vec<u8> = (0..100).map(|_| rng.gen_range(0..2) as u8).collect();
        let m = train_rf(&x, &y, 5, MaxFeaturesRule::Auto, MaxDepth::Bounded(2), 3).unwrap();
        for tree in &m.trees {
            // Max depth 2 means at most 1 + 2 + 4 = 7 nodes.
            assert!(tree.nodes.len() <= 7, "{} nodes", tree.nodes.len());
        }
    }

    #[test]
    fn single_class_rejected() {
        let x = vec![vec![1.0], vec![2.0]];
        assert!(matches!(
            train_rf(&x, &[0, 0], 10, MaxFeaturesRule::Auto, MaxDepth::Unlimited, 0),
            Err(Error::SingleClass)
        ));
    }
}
