//! Bagged CART trees with Gini splits and per-split feature subsampling.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{check_training, LearnerError, Matrix, ProbabilisticClassifier};
use crate::model::Label;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestParams {
    pub n_trees: usize,
    /// `None` grows trees until leaves are pure.
    pub max_depth: Option<usize>,
    pub min_split: usize,
    /// Features tried per split; `None` means `round(sqrt(d))`.
    pub max_features: Option<usize>,
    pub bootstrap: bool,
    pub seed: u64,
}

impl Default for ForestParams {
    fn default() -> Self {
        Self {
            n_trees: 100,
            max_depth: None,
            min_split: 2,
            max_features: None,
            bootstrap: true,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "t", rename_all = "snake_case")]
enum Node {
    Leaf { p1: f64 },
    Split { feature: usize, threshold: f64, left: u32, right: u32 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    nodes: Vec<Node>,
}

impl Tree {
    /// Fraction of class-1 training samples in the leaf reached by `x`.
    pub fn leaf_p1(&self, x: &[f64]) -> f64 {
        let mut i = 0usize;
        loop {
            match self.nodes[i] {
                Node::Leaf { p1 } => return p1,
                Node::Split { feature, threshold, left, right } => {
                    i = if x[feature] <= threshold { left } else { right } as usize;
                }
            }
        }
    }

    pub fn vote(&self, x: &[f64]) -> Label {
        if self.leaf_p1(x) > 0.5 {
            Label::Trusted
        } else {
            Label::Untrusted
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], i: usize) -> usize {
            match nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => {
                    1 + walk(nodes, left as usize).max(walk(nodes, right as usize))
                }
            }
        }
        walk(&self.nodes, 0)
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf { .. })).count()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomForest {
    n_features: usize,
    trees: Vec<Tree>,
}

impl RandomForest {
    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn trees(&self) -> &[Tree] {
        &self.trees
    }
}

impl ProbabilisticClassifier for RandomForest {
    /// Fraction of trees voting for each class.
    fn predict_proba(&self, x: &[f64]) -> [f64; 2] {
        let votes = self.trees.iter().filter(|t| t.vote(x) == Label::Trusted).count();
        let p1 = votes as f64 / self.trees.len() as f64;
        [1.0 - p1, p1]
    }
}

struct Builder<'a> {
    x: &'a Matrix,
    y: &'a [u8],
    max_depth: usize,
    min_split: usize,
    max_features: usize,
    rng: ChaCha8Rng,
    nodes: Vec<Node>,
    features: Vec<usize>,
    buf: Vec<(f64, u8)>,
}

struct Best {
    feature: usize,
    threshold: f64,
    score: f64,
}

impl Builder<'_> {
    fn leaf(&mut self, n1: usize, n: usize) -> u32 {
        self.nodes.push(Node::Leaf { p1: n1 as f64 / n as f64 });
        (self.nodes.len() - 1) as u32
    }

    /// Best split of `idx` on one feature, scored by `sum_c n_c^2 / n` over
    /// both children (maximizing it minimizes weighted Gini impurity).
    /// `None` if the feature is constant over the node.
    fn scan(&mut self, idx: &[usize], f: usize, total1: usize) -> Option<(f64, f64)> {
        self.buf.clear();
        self.buf.extend(idx.iter().map(|&i| (self.x.row(i)[f], self.y[i])));
        self.buf.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));
        let n = self.buf.len();
        if self.buf[0].0 == self.buf[n - 1].0 {
            return None;
        }
        let total0 = n - total1;
        let (mut l0, mut l1) = (0usize, 0usize);
        let mut best: Option<(f64, f64)> = None;
        for k in 0..n - 1 {
            if self.buf[k].1 == 1 {
                l1 += 1;
            } else {
                l0 += 1;
            }
            let (v, next) = (self.buf[k].0, self.buf[k + 1].0);
            if v == next {
                continue;
            }
            let nl = (k + 1) as f64;
            let nr = (n - k - 1) as f64;
            let (r0, r1) = ((total0 - l0) as f64, (total1 - l1) as f64);
            let score = ((l0 * l0 + l1 * l1) as f64) / nl + (r0 * r0 + r1 * r1) / nr;
            if best.is_none_or(|(s, _)| score > s) {
                let mid = v + (next - v) / 2.0;
                let threshold = if mid < next { mid } else { v };
                best = Some((score, threshold));
            }
        }
        best
    }

    fn build(&mut self, idx: &mut [usize], depth: usize) -> u32 {
        let n = idx.len();
        let n1 = idx.iter().filter(|&&i| self.y[i] == 1).count();
        if n1 == 0 || n1 == n || n < self.min_split || depth >= self.max_depth {
            return self.leaf(n1, n);
        }
        // Draw features in random order; constant ones do not count
        // towards the budget, so the search continues past them.
        let d = self.features.len();
        let mut best: Option<Best> = None;
        let mut visited = 0usize;
        for k in 0..d {
            if visited >= self.max_features {
                break;
            }
            let j = self.rng.random_range(k..d);
            self.features.swap(k, j);
            let f = self.features[k];
            if let Some((score, threshold)) = self.scan(idx, f, n1) {
                visited += 1;
                if best.as_ref().is_none_or(|b| score > b.score) {
                    best = Some(Best { feature: f, threshold, score });
                }
            }
        }
        let Some(best) = best else {
            return self.leaf(n1, n);
        };
        let mut split = 0;
        for k in 0..n {
            if self.x.row(idx[k])[best.feature] <= best.threshold {
                idx.swap(k, split);
                split += 1;
            }
        }
        let me = self.nodes.len();
        self.nodes.push(Node::Leaf { p1: 0.0 });
        let (l, r) = idx.split_at_mut(split);
        let left = self.build(l, depth + 1);
        let right = self.build(r, depth + 1);
        self.nodes[me] = Node::Split {
            feature: best.feature,
            threshold: best.threshold,
            left,
            right,
        };
        me as u32
    }
}

fn grow_tree(x: &Matrix, y: &[u8], params: &ForestParams, max_features: usize, seed: u64) -> Tree {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = x.rows();
    let mut idx: Vec<usize> = if params.bootstrap {
        (0..n).map(|_| rng.random_range(0..n)).collect()
    } else {
        (0..n).collect()
    };
    let mut features: Vec<usize> = (0..x.cols()).collect();
    features.shuffle(&mut rng);
    let mut b = Builder {
        x,
        y,
        max_depth: params.max_depth.unwrap_or(usize::MAX),
        min_split: params.min_split.max(2),
        max_features,
        rng,
        nodes: Vec::new(),
        features,
        buf: Vec::with_capacity(n),
    };
    b.build(&mut idx, 0);
    Tree { nodes: b.nodes }
}

pub fn train_random_forest(
    x: &Matrix,
    y: &[Label],
    params: &ForestParams,
) -> Result<RandomForest, LearnerError> {
    check_training(x, y)?;
    if params.n_trees == 0 {
        return Err(LearnerError::InvalidParameter("n_trees must be at least 1".into()));
    }
    let d = x.cols();
    let max_features = params
        .max_features
        .unwrap_or_else(|| (d as f64).sqrt().round() as usize)
        .clamp(1, d.max(1));
    let y: Vec<u8> = y.iter().map(|l| l.as_index() as u8).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let seeds: Vec<u64> = (0..params.n_trees).map(|_| rng.random()).collect();
    let trees = seeds
        .par_iter()
        .map(|&s| grow_tree(x, &y, params, max_features, s))
        .collect();
    Ok(RandomForest { n_features: d, trees })
}

#[cfg(test)]
mod tests {
    use super::super::testdata::{accuracy, blobs, xor};
    use super::*;

    #[test]
    fn separates_blobs() {
        let (x, y) = blobs(200, 6.0, 7);
        let rf = train_random_forest(&x, &y, &ForestParams { seed: 7, ..Default::default() }).unwrap();
        assert!(accuracy(&rf, &x, &y) >= 0.99);
    }

    #[test]
    fn fits_xor_exactly() {
        let (x, y) = xor();
        let params = ForestParams { n_trees: 1, bootstrap: false, max_features: Some(2), ..Default::default() };
        let rf = train_random_forest(&x, &y, &params).unwrap();
        assert_eq!(accuracy(&rf, &x, &y), 1.0);
        assert!(rf.trees()[0].depth() >= 2);
        let bagged = train_random_forest(&x, &y, &ForestParams { seed: 3, ..Default::default() }).unwrap();
        assert_eq!(accuracy(&bagged, &x, &y), 1.0);
    }

    #[test]
    fn depth_limit_respected() {
        let (x, y) = blobs(200, 1.0, 3);
        let params = ForestParams { max_depth: Some(2), n_trees: 10, ..Default::default() };
        let rf = train_random_forest(&x, &y, &params).unwrap();
        assert!(rf.trees().iter().all(|t| t.depth() <= 2 && t.n_leaves() <= 4));
    }

    #[test]
    fn unlimited_depth_fits_training_bag() {
        // without bootstrap and distinct points every leaf is pure
        let (x, y) = blobs(100, 0.5, 5);
        let params = ForestParams { n_trees: 1, bootstrap: false, ..Default::default() };
        let rf = train_random_forest(&x, &y, &params).unwrap();
        assert_eq!(accuracy(&rf, &x, &y), 1.0);
    }

    #[test]
    fn identical_points_with_both_labels_make_an_impure_leaf() {
        let x = Matrix::from_rows(&[[1.0], [1.0], [1.0]]).unwrap();
        let y = [Label::Trusted, Label::Trusted, Label::Untrusted];
        let params = ForestParams { n_trees: 1, bootstrap: false, ..Default::default() };
        let rf = train_random_forest(&x, &y, &params).unwrap();
        assert!((rf.trees()[0].leaf_p1(&[1.0]) - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(rf.predict_proba(&[1.0]), [0.0, 1.0]);
    }

    #[test]
    fn deterministic_for_seed() {
        let (x, y) = blobs(120, 1.5, 9);
        let p = ForestParams { seed: 11, ..Default::default() };
        let a = train_random_forest(&x, &y, &p).unwrap();
        let b = train_random_forest(&x, &y, &p).unwrap();
        assert_eq!(a, b);
    }
}
