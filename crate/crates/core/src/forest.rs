//! CART trees with per-node random feature subsets, grown to purity, and
//! bootstrap ensembles that predict by averaging leaf posteriors.

use std::cmp::Ordering;

use rand::seq::SliceRandom;
use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{round_half_up, Dataset};
use crate::metrics::argmax;
use crate::seed;

#[derive(Debug, Error, PartialEq)]
pub enum ForestError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("expected a {expected}-dimensional input, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("input contains non-finite values")]
    NonFinite,
}

pub type Result<T> = std::result::Result<T, ForestError>;

/// A node of a fitted tree. Points with `x[feature] <= threshold` go left.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TreeNode {
    Internal {
        feature: usize,
        threshold: f64,
        left: Box<TreeNode>,
        right: Box<TreeNode>,
    },
    Leaf {
        posterior: Vec<f64>,
        count: usize,
        #[serde(default)]
        cell_id: usize,
    },
}

impl TreeNode {
    pub fn is_leaf(&self) -> bool {
        matches!(self, TreeNode::Leaf { .. })
    }

    /// The leaf reached by `x`.
    pub fn leaf(&self, x: &[f64]) -> &TreeNode {
        let mut node = self;
        while let TreeNode::Internal {
            feature,
            threshold,
            left,
            right,
        } = node
        {
            node = if x[*feature] <= *threshold { left } else { right };
        }
        node
    }

    pub fn posterior(&self, x: &[f64]) -> &[f64] {
        match self.leaf(x) {
            TreeNode::Leaf { posterior, .. } => posterior,
            TreeNode::Internal { .. } => unreachable!("leaf() always ends at a leaf"),
        }
    }

    pub fn cell_id(&self, x: &[f64]) -> usize {
        match self.leaf(x) {
            TreeNode::Leaf { cell_id, .. } => *cell_id,
            TreeNode::Internal { .. } => unreachable!("leaf() always ends at a leaf"),
        }
    }

    /// Branch directions from the root to the leaf of `x`; `true` is right.
    pub fn path(&self, x: &[f64]) -> Vec<bool> {
        let mut out = Vec::new();
        let mut node = self;
        while let TreeNode::Internal {
            feature,
            threshold,
            left,
            right,
        } = node
        {
            let right_side = x[*feature] > *threshold;
            out.push(right_side);
            node = if right_side { right } else { left };
        }
        out
    }

    /// Number of edges on the longest root-to-leaf path.
    pub fn depth(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 0,
            TreeNode::Internal { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }

    pub fn leaf_count(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 1,
            TreeNode::Internal { left, right, .. } => left.leaf_count() + right.leaf_count(),
        }
    }

    /// Axis-aligned cell of every leaf as per-feature `(lo, hi]` intervals.
    pub fn leaf_boxes(&self, dim: usize) -> Vec<LeafBox> {
        let mut out = Vec::new();
        let mut bounds = vec![(f64::NEG_INFINITY, f64::INFINITY); dim];
        self.collect_boxes(&mut bounds, &mut out);
        out
    }

    fn collect_boxes(&self, bounds: &mut Vec<(f64, f64)>, out: &mut Vec<LeafBox>) {
        match self {
            TreeNode::Leaf { cell_id, .. } => out.push(LeafBox {
                cell_id: *cell_id,
                bounds: bounds.clone(),
            }),
            TreeNode::Internal {
                feature,
                threshold,
                left,
                right,
            } => {
                let saved = bounds[*feature];
                bounds[*feature].1 = saved.1.min(*threshold);
                left.collect_boxes(bounds, out);
                bounds[*feature] = (saved.0.max(*threshold), saved.1);
                right.collect_boxes(bounds, out);
                bounds[*feature] = saved;
            }
        }
    }
}

/// Leaf cell of a tree: `lo < x[j] <= hi` for every feature `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct LeafBox {
    pub cell_id: usize,
    pub bounds: Vec<(f64, f64)>,
}

impl LeafBox {
    pub fn contains(&self, x: &[f64]) -> bool {
        self.bounds
            .iter()
            .zip(x)
            .all(|(&(lo, hi), &v)| lo < v && v <= hi)
    }
}

// ---------------------------------------------------------------------------
// Split search

/// Weighted child score `sum_k l_k^2 / n_l + sum_k r_k^2 / n_r` as an exact
/// fraction. Larger is better: it equals `n - n * weighted_gini`.
#[derive(Debug, Clone, Copy)]
struct Score {
    num: u128,
    den: u128,
}

impl Score {
    fn of_node(sq: u128, n: u128) -> Self {
        Score { num: sq, den: n }
    }

    fn of_split(sq_left: u128, n_left: u128, sq_right: u128, n_right: u128) -> Self {
        Score {
            num: sq_left * n_right + sq_right * n_left,
            den: n_left * n_right,
        }
    }

    fn cmp(&self, other: &Score) -> Ordering {
        (self.num * other.den).cmp(&(other.num * self.den))
    }
}

#[derive(Debug, Clone, Copy)]
struct Split {
    feature: usize,
    threshold: f64,
    score: Score,
}

fn sum_sq(counts: &[usize]) -> u128 {
    counts.iter().map(|&c| (c as u128) * (c as u128)).sum()
}

fn midpoint(a: f64, b: f64) -> f64 {
    let mid = a + (b - a) / 2.0;
    if mid < b {
        mid
    } else {
        a
    }
}

struct Grower<'a> {
    ds: &'a Dataset,
    max_features: usize,
    rng: seed::Rng,
    buf: Vec<(f64, usize)>,
    left_counts: Vec<usize>,
    features: Vec<usize>,
    next_cell: usize,
}

impl<'a> Grower<'a> {
    fn new(ds: &'a Dataset, max_features: usize, rng: seed::Rng) -> Self {
        Self {
            ds,
            max_features,
            rng,
            buf: Vec::new(),
            left_counts: vec![0; ds.class_count()],
            features: (0..ds.dim()).collect(),
            next_cell: 0,
        }
    }

    fn counts(&self, idx: &[usize]) -> Vec<usize> {
        let mut counts = vec![0; self.ds.class_count()];
        for &i in idx {
            counts[self.ds.label(i)] += 1;
        }
        counts
    }

    fn leaf(&mut self, counts: &[usize]) -> TreeNode {
        let n: usize = counts.iter().sum();
        let cell_id = self.next_cell;
        self.next_cell += 1;
        TreeNode::Leaf {
            posterior: counts.iter().map(|&c| c as f64 / n as f64).collect(),
            count: n,
            cell_id,
        }
    }

    fn grow(&mut self, idx: &mut [usize]) -> TreeNode {
        let counts = self.counts(idx);
        let nonzero = counts.iter().filter(|&&c| c > 0).count();
        if nonzero <= 1 {
            return self.leaf(&counts);
        }
        let parent = Score::of_node(sum_sq(&counts), idx.len() as u128);
        match self.best_split(idx, &counts) {
            Some(split) if split.score.cmp(&parent) == Ordering::Greater => {
                let ds = self.ds;
                let mid = partition_in_place(idx, |&i| {
                    ds.row(i)[split.feature] <= split.threshold
                });
                let (l, r) = idx.split_at_mut(mid);
                let left = self.grow(l);
                let right = self.grow(r);
                TreeNode::Internal {
                    feature: split.feature,
                    threshold: split.threshold,
                    left: Box::new(left),
                    right: Box::new(right),
                }
            }
            _ => self.leaf(&counts),
        }
    }

    /// Visit features in random order and evaluate the first `max_features`
    /// that are not constant on this node.
    fn best_split(&mut self, idx: &[usize], counts: &[usize]) -> Option<Split> {
        self.features.shuffle(&mut self.rng);
        let mut best: Option<Split> = None;
        let mut evaluated = 0;
        for fi in 0..self.features.len() {
            if evaluated == self.max_features {
                break;
            }
            let feature = self.features[fi];
            if let Some(candidate) = self.best_split_on(idx, counts, feature) {
                evaluated += 1;
                let better = match &best {
                    None => true,
                    Some(b) => match candidate.score.cmp(&b.score) {
                        Ordering::Greater => true,
                        Ordering::Equal => candidate.feature < b.feature,
                        Ordering::Less => false,
                    },
                };
                if better {
                    best = Some(candidate);
                }
            }
        }
        best
    }

    /// Best threshold on one feature, or `None` when the feature is constant.
    fn best_split_on(&mut self, idx: &[usize], counts: &[usize], feature: usize) -> Option<Split> {
        self.buf.clear();
        self.buf
            .extend(idx.iter().map(|&i| (self.ds.row(i)[feature], self.ds.label(i))));
        self.buf
            .sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        if self.buf[0].0 == self.buf[self.buf.len() - 1].0 {
            return None;
        }
        let n = self.buf.len();
        self.left_counts.iter_mut().for_each(|c| *c = 0);
        let mut sq_left: u128 = 0;
        let mut sq_right: u128 = sum_sq(counts);
        let mut best: Option<Split> = None;
        for i in 0..n - 1 {
            let (value, y) = self.buf[i];
            // incremental update of the squared class counts
            let l = self.left_counts[y] as u128;
            let r = (counts[y] - self.left_counts[y]) as u128;
            sq_left += 2 * l + 1;
            sq_right -= 2 * r - 1;
            self.left_counts[y] += 1;
            let next = self.buf[i + 1].0;
            if value == next {
                continue;
            }
            let n_left = (i + 1) as u128;
            let score = Score::of_split(sq_left, n_left, sq_right, n as u128 - n_left);
            // strict improvement keeps the lowest threshold on ties
            if best.map_or(true, |b| score.cmp(&b.score) == Ordering::Greater) {
                best = Some(Split {
                    feature,
                    threshold: midpoint(value, next),
                    score,
                });
            }
        }
        best
    }
}

fn partition_in_place<F: Fn(&usize) -> bool>(idx: &mut [usize], pred: F) -> usize {
    let mut mid = 0;
    for i in 0..idx.len() {
        if pred(&idx[i]) {
            idx.swap(i, mid);
            mid += 1;
        }
    }
    mid
}

fn check_max_features(ds: &Dataset, max_features: usize) -> Result<()> {
    if ds.is_empty() {
        return Err(ForestError::InvalidArgument("empty dataset".into()));
    }
    if max_features == 0 || max_features > ds.dim() {
        return Err(ForestError::InvalidArgument(format!(
            "max_features must be in 1..={}, got {max_features}",
            ds.dim()
        )));
    }
    Ok(())
}

/// Grow one tree on every row of `ds` until leaves are pure or no split
/// strictly lowers the weighted Gini impurity.
pub fn train_tree(ds: &Dataset, max_features: usize, seed: u64) -> Result<TreeNode> {
    check_max_features(ds, max_features)?;
    let mut idx: Vec<usize> = (0..ds.len()).collect();
    let mut grower = Grower::new(ds, max_features, seed::rng(seed));
    Ok(grower.grow(&mut idx))
}

fn train_on_bootstrap(ds: &Dataset, max_features: usize, seed: u64, bootstrap: bool) -> TreeNode {
    let mut rng = seed::rng(seed);
    let n = ds.len();
    let mut idx: Vec<usize> = if bootstrap {
        (0..n).map(|_| rng.gen_range(0..n)).collect()
    } else {
        (0..n).collect()
    };
    let mut grower = Grower::new(ds, max_features, rng);
    grower.grow(&mut idx)
}

// ---------------------------------------------------------------------------
// Forests

/// Per-split feature budget, resolved against the input dimension with
/// round-half-up and a floor of 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MaxFeatures {
    Sqrt,
    Quarter,
    Third,
    /// `d / 1.5`
    TwoThirds,
    All,
    Count(usize),
}

impl MaxFeatures {
    /// The tuning grid `sqrt(d), d/4, d/3, d/1.5, d`.
    pub const GRID: [MaxFeatures; 5] = [
        MaxFeatures::Sqrt,
        MaxFeatures::Quarter,
        MaxFeatures::Third,
        MaxFeatures::TwoThirds,
        MaxFeatures::All,
    ];

    pub fn resolve(self, d: usize) -> usize {
        let v = match self {
            MaxFeatures::Sqrt => (d as f64).sqrt(),
            MaxFeatures::Quarter => d as f64 / 4.0,
            MaxFeatures::Third => d as f64 / 3.0,
            MaxFeatures::TwoThirds => d as f64 / 1.5,
            MaxFeatures::All => return d,
            MaxFeatures::Count(c) => return c.clamp(1, d),
        };
        round_half_up(v).min(d)
    }

    /// Distinct resolved values of `GRID`, ascending.
    pub fn grid_values(d: usize) -> Vec<usize> {
        let mut v: Vec<usize> = Self::GRID.iter().map(|m| m.resolve(d)).collect();
        v.sort_unstable();
        v.dedup();
        v
    }
}

impl std::str::FromStr for MaxFeatures {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Ok(match s {
            "sqrt" => MaxFeatures::Sqrt,
            "quarter" => MaxFeatures::Quarter,
            "third" => MaxFeatures::Third,
            "two-thirds" => MaxFeatures::TwoThirds,
            "all" => MaxFeatures::All,
            other => MaxFeatures::Count(
                other
                    .parse()
                    .map_err(|_| format!("unknown max-features `{other}`"))?,
            ),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestParams {
    pub tree_count: usize,
    pub max_features: usize,
    pub bootstrap: bool,
}

pub const DEFAULT_TREE_COUNT: usize = 500;

impl ForestParams {
    pub fn new(tree_count: usize, max_features: usize) -> Self {
        Self {
            tree_count,
            max_features,
            bootstrap: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub trees: Vec<TreeNode>,
    pub tree_count: usize,
    pub max_features: usize,
    pub bootstrap: bool,
    pub bootstrap_seeds: Vec<u64>,
    pub dimension: usize,
    pub class_count: usize,
    pub criterion: String,
    #[serde(skip)]
    pub(crate) depth: DepthCache,
}

/// Lazily computed maximum tree depth. Ignored by equality.
#[derive(Debug, Clone, Default)]
pub(crate) struct DepthCache(std::sync::OnceLock<usize>);

impl PartialEq for DepthCache {
    fn eq(&self, _: &Self) -> bool {
        true
    }
}

/// Train `tree_count` trees, each on its own bootstrap resample drawn from
/// a per-tree substream of `seed`. The result does not depend on how many
/// threads rayon uses.
pub fn train_forest(ds: &Dataset, params: &ForestParams, seed: u64) -> Result<ForestModel> {
    check_max_features(ds, params.max_features)?;
    if params.tree_count == 0 {
        return Err(ForestError::InvalidArgument("tree_count must be >= 1".into()));
    }
    let seeds: Vec<u64> = (0..params.tree_count as u64)
        .map(|t| seed::substream(seed, "tree", t))
        .collect();
    let trees = seeds
        .par_iter()
        .map(|&s| train_on_bootstrap(ds, params.max_features, s, params.bootstrap))
        .collect();
    Ok(ForestModel {
        trees,
        tree_count: params.tree_count,
        max_features: params.max_features,
        bootstrap: params.bootstrap,
        bootstrap_seeds: seeds,
        dimension: ds.dim(),
        class_count: ds.class_count(),
        criterion: "gini".into(),
        depth: DepthCache::default(),
    })
}

impl ForestModel {
    pub(crate) fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dimension {
            return Err(ForestError::DimensionMismatch {
                expected: self.dimension,
                got: x.len(),
            });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(ForestError::NonFinite);
        }
        Ok(())
    }

    /// Mean of the leaf posteriors reached by `x` in every tree.
    pub fn posterior(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_input(x)?;
        let mut acc = vec![0.0; self.class_count];
        for tree in &self.trees {
            for (a, p) in acc.iter_mut().zip(tree.posterior(x)) {
                *a += p;
            }
        }
        let t = self.trees.len() as f64;
        acc.iter_mut().for_each(|a| *a /= t);
        Ok(acc)
    }

    /// Arg-max of the posterior, ties to the smaller class index.
    pub fn predict(&self, x: &[f64]) -> Result<usize> {
        self.posterior(x).map(|p| argmax(&p))
    }

    pub fn max_depth(&self) -> usize {
        *self
            .depth
            .0
            .get_or_init(|| self.trees.iter().map(TreeNode::depth).max().unwrap_or(0))
    }
}

pub fn forest_posterior(m: &ForestModel, x: &[f64]) -> Result<Vec<f64>> {
    m.posterior(x)
}

pub fn forest_predict(m: &ForestModel, x: &[f64]) -> Result<usize> {
    m.predict(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_d(xs: &[f64], ys: &[usize]) -> Dataset {
        Dataset::new("t", xs.to_vec(), 1, ys.to_vec(), 2).unwrap()
    }

    fn leaf(posterior: Vec<f64>) -> TreeNode {
        TreeNode::Leaf {
            posterior,
            count: 1,
            cell_id: 0,
        }
    }

    #[test]
    fn forced_stump() {
        let tree = train_tree(&one_d(&[0.0, 1.0], &[0, 1]), 1, 0).unwrap();
        match &tree {
            TreeNode::Internal {
                feature,
                threshold,
                left,
                right,
            } => {
                assert_eq!((*feature, *threshold), (0, 0.5));
                assert_eq!(left.posterior(&[0.0]), &[1.0, 0.0]);
                assert_eq!(right.posterior(&[1.0]), &[0.0, 1.0]);
            }
            TreeNode::Leaf { .. } => panic!("expected a split"),
        }
    }

    #[test]
    fn pure_input_is_single_leaf() {
        let tree = train_tree(&one_d(&[0.0, 1.0, 2.0], &[1, 1, 1]), 1, 0).unwrap();
        assert_eq!(tree.depth(), 0);
        assert_eq!(tree.posterior(&[5.0]), &[0.0, 1.0]);
    }

    #[test]
    fn indivisible_duplicates_make_mixed_leaf() {
        let tree = train_tree(&one_d(&[1.0, 1.0], &[0, 1]), 1, 0).unwrap();
        assert_eq!(tree.posterior(&[1.0]), &[0.5, 0.5]);
    }

    #[test]
    fn threshold_ties_route_left() {
        let tree = train_tree(&one_d(&[0.0, 1.0], &[0, 1]), 1, 0).unwrap();
        assert_eq!(tree.path(&[0.5]), vec![false]);
        assert_eq!(tree.path(&[0.5000001]), vec![true]);
    }

    #[test]
    fn rejects_bad_max_features() {
        let ds = one_d(&[0.0, 1.0], &[0, 1]);
        assert!(train_tree(&ds, 0, 0).is_err());
        assert!(train_tree(&ds, 2, 0).is_err());
        assert!(train_forest(&ds, &ForestParams::new(0, 1), 0).is_err());
    }

    #[test]
    fn max_features_grid_for_d100() {
        assert_eq!(MaxFeatures::grid_values(100), vec![10, 25, 33, 67, 100]);
        assert_eq!(MaxFeatures::grid_values(2), vec![1, 2]);
        assert_eq!(MaxFeatures::Sqrt.resolve(1), 1);
    }

    #[test]
    fn unbootstrapped_single_tree_equals_train_tree() {
        let (ds, _) = crate::data::gen_gaussian_xor(200, 1, 0.5, 3).unwrap();
        let params = ForestParams {
            tree_count: 1,
            max_features: 2,
            bootstrap: false,
        };
        let forest = train_forest(&ds, &params, 8).unwrap();
        let tree = train_tree(&ds, 2, forest.bootstrap_seeds[0]).unwrap();
        assert_eq!(forest.trees[0], tree);
    }

    #[test]
    fn posterior_averages_trees() {
        let m = ForestModel {
            trees: vec![leaf(vec![1.0, 0.0]), leaf(vec![0.0, 1.0])],
            tree_count: 2,
            max_features: 1,
            bootstrap: true,
            bootstrap_seeds: vec![0, 1],
            dimension: 1,
            class_count: 2,
            criterion: "gini".into(),
            depth: Default::default(),
        };
        assert_eq!(m.posterior(&[3.0]).unwrap(), vec![0.5, 0.5]);
        assert_eq!(m.predict(&[3.0]).unwrap(), 0);
        assert_eq!(
            m.posterior(&[1.0, 2.0]),
            Err(ForestError::DimensionMismatch {
                expected: 1,
                got: 2
            })
        );
        assert_eq!(m.posterior(&[f64::NAN]), Err(ForestError::NonFinite));
    }

    #[test]
    fn memorizes_training_points() {
        let (ds, _) = crate::data::gen_gaussian_xor(300, 1, 0.5, 4).unwrap();
        let tree = train_tree(&ds, 2, 1).unwrap();
        for (i, row) in ds.rows().enumerate() {
            let p = tree.posterior(row);
            assert_eq!(argmax(p), ds.label(i));
        }
    }

    #[test]
    fn leaf_boxes_partition_points() {
        let (ds, _) = crate::data::gen_gaussian_xor(200, 1, 0.5, 5).unwrap();
        let tree = train_tree(&ds, 1, 2).unwrap();
        let boxes = tree.leaf_boxes(2);
        assert_eq!(boxes.len(), tree.leaf_count());
        for row in ds.rows() {
            let hits: Vec<_> = boxes.iter().filter(|b| b.contains(row)).collect();
            assert_eq!(hits.len(), 1);
            assert_eq!(hits[0].cell_id, tree.cell_id(row));
        }
    }

    #[test]
    fn json_round_trip_is_exact() {
        let (ds, _) = crate::data::gen_gaussian_xor(100, 1, 0.5, 6).unwrap();
        let forest = train_forest(&ds, &ForestParams::new(3, 1), 1).unwrap();
        let text = serde_json::to_string(&forest).unwrap();
        let back: ForestModel = serde_json::from_str(&text).unwrap();
        assert_eq!(back, forest);
    }
}
