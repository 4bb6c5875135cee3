//! Gini CART trees and bagged forests.

use rand::seq::index::sample;
use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::Dataset;
use crate::scalar::Scalar;
use crate::seed;

/// Tree node. Rows with `x[feature] <= threshold` go left.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", bound = "")]
pub enum TreeNode<S: Scalar> {
    Leaf {
        prob: f64,
        n: usize,
    },
    Split {
        feature: usize,
        threshold: S,
        left: Box<TreeNode<S>>,
        right: Box<TreeNode<S>>,
    },
}

impl<S: Scalar> TreeNode<S> {
    pub fn predict(&self, row: &[S]) -> f64 {
        let mut node = self;
        loop {
            match node {
                TreeNode::Leaf { prob, .. } => return *prob,
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => node = if row[*feature] <= *threshold { left } else { right },
            }
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 0,
            TreeNode::Split { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }

    pub fn n_leaves(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 1,
            TreeNode::Split { left, right, .. } => left.n_leaves() + right.n_leaves(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreeParams {
    pub max_depth: usize,
    pub min_leaf: usize,
    /// Features drawn per split; `None` uses all of them.
    pub max_features: Option<usize>,
}

impl Default for TreeParams {
    fn default() -> Self {
        Self {
            max_depth: 12,
            min_leaf: 1,
            max_features: None,
        }
    }
}

struct Best<S> {
    score: f64,
    feature: usize,
    threshold: S,
}

/// Sum over children of `(pos² + neg²) / n`; maximizing it minimizes the
/// weighted Gini impurity.
fn purity(pos: usize, n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let (p, q) = (pos as f64, (n - pos) as f64);
    (p * p + q * q) / n as f64
}

struct Grower<'a, S: Scalar> {
    ds: &'a Dataset<S>,
    params: TreeParams,
}

impl<S: Scalar> Grower<'_, S> {
    fn best_split(&self, rows: &[usize], features: &[usize]) -> Option<Best<S>> {
        let n = rows.len();
        let pos_total = rows.iter().filter(|&&r| self.ds.label(r) == 1).count();
        let mut best: Option<Best<S>> = None;
        let mut pairs: Vec<(S, u8)> = Vec::with_capacity(n);
        for &f in features {
            pairs.clear();
            pairs.extend(rows.iter().map(|&r| (self.ds.row(r)[f], self.ds.label(r))));
            pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
            let mut left_pos = 0;
            for i in 0..n - 1 {
                left_pos += usize::from(pairs[i].1);
                if pairs[i].0 == pairs[i + 1].0 {
                    continue;
                }
                let nl = i + 1;
                if nl < self.params.min_leaf || n - nl < self.params.min_leaf {
                    continue;
                }
                let score = purity(left_pos, nl) + purity(pos_total - left_pos, n - nl);
                if best.as_ref().is_none_or(|b| score > b.score) {
                    let two = S::one() + S::one();
                    best = Some(Best {
                        score,
                        feature: f,
                        threshold: (pairs[i].0 + pairs[i + 1].0) / two,
                    });
                }
            }
        }
        best
    }

    fn grow(&self, rows: &[usize], depth: usize, rng: &mut seed::Rng) -> TreeNode<S> {
        let n = rows.len();
        let pos = rows.iter().filter(|&&r| self.ds.label(r) == 1).count();
        let leaf = TreeNode::Leaf {
            prob: pos as f64 / n as f64,
            n,
        };
        if depth >= self.params.max_depth || pos == 0 || pos == n || n < 2 * self.params.min_leaf {
            return leaf;
        }
        let d = self.ds.n_features();
        let features: Vec<usize> = match self.params.max_features {
            Some(m) if m < d => {
                let mut f = sample(rng, d, m.max(1)).into_vec();
                f.sort_unstable();
                f
            }
            _ => (0..d).collect(),
        };
        let Some(best) = self.best_split(rows, &features) else {
            return leaf;
        };
        // A split that does not reduce impurity is still taken: XOR-like data
        // needs one before any gain appears.
        let (l, r): (Vec<usize>, Vec<usize>) = rows
            .iter()
            .partition(|&&i| self.ds.row(i)[best.feature] <= best.threshold);
        TreeNode::Split {
            feature: best.feature,
            threshold: best.threshold,
            left: Box::new(self.grow(&l, depth + 1, rng)),
            right: Box::new(self.grow(&r, depth + 1, rng)),
        }
    }
}

fn check_params(ds_rows: usize, params: &TreeParams) -> Result<()> {
    if ds_rows == 0 {
        return Err(Error::EmptyDataset);
    }
    if params.min_leaf == 0 {
        return Err(Error::InvalidArgument("min_leaf must be at least 1".into()));
    }
    if ds_rows < params.min_leaf {
        return Err(Error::Precondition(format!(
            "{ds_rows} rows is fewer than min_leaf {}",
            params.min_leaf
        )));
    }
    Ok(())
}

/// Greedy CART on Gini impurity. Candidate thresholds are midpoints between
/// consecutive distinct values; ties go to the lower feature index, then the
/// lower threshold.
pub fn train_dtree<S: Scalar>(ds: &Dataset<S>, params: TreeParams) -> Result<TreeNode<S>> {
    train_dtree_seeded(ds, params, 0)
}

fn train_dtree_seeded<S: Scalar>(ds: &Dataset<S>, params: TreeParams, seed: u64) -> Result<TreeNode<S>> {
    check_params(ds.n_rows(), &params)?;
    let rows: Vec<usize> = (0..ds.n_rows()).collect();
    let grower = Grower { ds, params };
    Ok(grower.grow(&rows, 0, &mut seed::rng(seed)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestParams {
    pub n_trees: usize,
    pub tree: TreeParams,
    pub bootstrap: bool,
}

impl ForestParams {
    /// Bootstrap sampling with `floor(sqrt(d))` features per split.
    pub fn bagged(n_trees: usize, max_depth: usize, n_features: usize) -> Self {
        Self {
            n_trees,
            tree: TreeParams {
                max_depth,
                min_leaf: 1,
                max_features: Some(((n_features as f64).sqrt().floor() as usize).max(1)),
            },
            bootstrap: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct Forest<S: Scalar> {
    pub trees: Vec<TreeNode<S>>,
}

impl<S: Scalar> Forest<S> {
    pub fn predict(&self, row: &[S]) -> f64 {
        self.trees.iter().map(|t| t.predict(row)).sum::<f64>() / self.trees.len() as f64
    }
}

/// Bagged trees; probability is the mean leaf probability.
pub fn train_forest<S: Scalar>(ds: &Dataset<S>, params: &ForestParams, seed: u64) -> Result<Forest<S>> {
    if params.n_trees == 0 {
        return Err(Error::InvalidArgument("n_trees must be at least 1".into()));
    }
    check_params(ds.n_rows(), &params.tree)?;
    let trees = (0..params.n_trees)
        .into_par_iter()
        .map(|t| {
            let tree_seed = seed::derive(seed, &format!("tree/{t}"));
            if !params.bootstrap {
                return train_dtree_seeded(ds, params.tree, tree_seed);
            }
            let mut rng = seed::rng(tree_seed);
            let n = ds.n_rows();
            let idx: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
            train_dtree_seeded(&ds.select(&idx), params.tree, seed::splitmix64(tree_seed))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Forest { trees })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ds(x: Vec<f64>, d: usize, y: Vec<u8>) -> Dataset<f64> {
        Dataset::new((0..d).map(|i| format!("f{i}")).collect(), x, y).unwrap()
    }

    #[test]
    fn pure_labels_give_one_leaf() {
        let t = train_dtree(&ds(vec![1.0, 2.0, 3.0], 1, vec![1, 1, 1]), TreeParams::default()).unwrap();
        assert_eq!(t, TreeNode::Leaf { prob: 1.0, n: 3 });
    }

    #[test]
    fn xor_needs_depth_two() {
        let data = ds(vec![0.0, 0.0, 0.0, 1.0, 1.0, 0.0, 1.0, 1.0], 2, vec![0, 1, 1, 0]);
        let t = train_dtree(&data, TreeParams { max_depth: 2, ..Default::default() }).unwrap();
        for i in 0..4 {
            assert_eq!(t.predict(data.row(i)), f64::from(data.label(i)));
        }
    }

    #[test]
    fn depth_one_matches_brute_force_threshold() {
        let x = vec![0.5, 1.0, 1.5, 2.0, 3.0, 3.5, 4.0, 6.0];
        let y = vec![0, 0, 1, 0, 1, 1, 0, 1];
        let t = train_dtree(&ds(x.clone(), 1, y.clone()), TreeParams { max_depth: 1, ..Default::default() }).unwrap();
        let gini = |s: &[u8]| {
            if s.is_empty() {
                return 0.0;
            }
            let p = s.iter().filter(|&&v| v == 1).count() as f64 / s.len() as f64;
            1.0 - p * p - (1.0 - p) * (1.0 - p)
        };
        let mut best = (f64::INFINITY, 0.0);
        for i in 0..x.len() - 1 {
            let thr = (x[i] + x[i + 1]) / 2.0;
            let l: Vec<u8> = (0..x.len()).filter(|&j| x[j] <= thr).map(|j| y[j]).collect();
            let r: Vec<u8> = (0..x.len()).filter(|&j| x[j] > thr).map(|j| y[j]).collect();
            let w = (l.len() as f64 * gini(&l) + r.len() as f64 * gini(&r)) / x.len() as f64;
            if w < best.0 - 1e-12 {
                best = (w, thr);
            }
        }
        match t {
            TreeNode::Split { threshold, .. } => assert_eq!(threshold, best.1),
            _ => panic!("expected a split"),
        }
    }

    #[test]
    fn degenerate_forest_is_the_tree() {
        let data = ds(
            (0..60).map(|i| ((i * 37) % 11) as f64).collect(),
            3,
            (0..20).map(|i| u8::from(i % 3 == 0)).collect(),
        );
        let p = TreeParams::default();
        let tree = train_dtree(&data, p).unwrap();
        let forest = train_forest(&data, &ForestParams { n_trees: 1, tree: p, bootstrap: false }, 9).unwrap();
        assert_eq!(forest.trees[0], tree);
    }

    #[test]
    fn empty_and_bad_params() {
        let data = ds(vec![], 1, vec![]);
        assert!(train_dtree(&data, TreeParams::default()).is_err());
        let one = ds(vec![1.0], 1, vec![1]);
        assert!(train_dtree(&one, TreeParams { min_leaf: 2, ..Default::default() }).is_err());
    }
}
