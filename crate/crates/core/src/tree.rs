//! CART regression trees: greedy axis-aligned splits minimizing the total
//! sum of squared deviations.

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::numerics::RandomSource;

/// Impurity reductions below `PURITY_GUARD * var(y_node)` count as zero so
/// that nodes never split on floating-point noise.
const PURITY_GUARD: f64 = 1e-12;

/// A node is pure when max(y) - min(y) is at most this.
const PURE_NODE_TOLERANCE: f64 = 1e-12;

/// Tree-growing parameters. Defaults mirror the usual CART regression
/// defaults: grow until pure, consider every feature at every split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeConfig {
    pub min_samples_split: usize,
    pub min_samples_leaf: usize,
    pub max_depth: Option<usize>,
    /// Number of features drawn (without replacement) per split. `None`
    /// means all features.
    pub max_features: Option<usize>,
    /// Seed for the feature subsampler; only consulted when
    /// `max_features < p`.
    pub seed: u64,
}

impl Default for TreeConfig {
    fn default() -> Self {
        Self {
            min_samples_split: 2,
            min_samples_leaf: 1,
            max_depth: None,
            max_features: None,
            seed: 0,
        }
    }
}

impl TreeConfig {
    fn validate(&self, n_features: usize) -> Result<()> {
        if self.min_samples_split < 2 {
            return Err(Error::InvalidParameter(
                "min_samples_split must be at least 2".into(),
            ));
        }
        if self.min_samples_leaf < 1 {
            return Err(Error::InvalidParameter(
                "min_samples_leaf must be at least 1".into(),
            ));
        }
        if let Some(m) = self.max_features {
            if m == 0 || m > n_features {
                return Err(Error::InvalidParameter(format!(
                    "max_features must be in 1..={n_features}, got {m}"
                )));
            }
        }
        Ok(())
    }
}

/// Tree node in the nested text format: either a split
/// (`feature_index`, `threshold`, two children) or a leaf
/// (`prediction`, `n_leaf`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Node {
    Split {
        feature_index: usize,
        threshold: f64,
        left: Box<Node>,
        right: Box<Node>,
    },
    Leaf {
        prediction: f64,
        n_leaf: usize,
    },
}

/// A fitted CART regression tree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionTree {
    n_features: usize,
    root: Node,
}

impl RegressionTree {
    /// Assemble a tree from an explicit node structure (deserialization and
    /// fixtures). The structure is trusted; only feature indices are checked.
    pub fn from_parts(n_features: usize, root: Node) -> Result<Self> {
        fn check(node: &Node, p: usize) -> Result<()> {
            match node {
                Node::Leaf { .. } => Ok(()),
                Node::Split {
                    feature_index,
                    left,
                    right,
                    ..
                } => {
                    if *feature_index >= p {
                        return Err(Error::InvalidParameter(format!(
                            "split on feature {feature_index} but tree has {p} features"
                        )));
                    }
                    check(left, p)?;
                    check(right, p)
                }
            }
        }
        check(&root, n_features)?;
        Ok(Self { n_features, root })
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn root(&self) -> &Node {
        &self.root
    }

    pub fn n_leaves(&self) -> usize {
        fn count(node: &Node) -> usize {
            match node {
                Node::Leaf { .. } => 1,
                Node::Split { left, right, .. } => count(left) + count(right),
            }
        }
        count(&self.root)
    }

    pub fn depth(&self) -> usize {
        fn depth(node: &Node) -> usize {
            match node {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + depth(left).max(depth(right)),
            }
        }
        depth(&self.root)
    }

    /// Feature indices that appear in at least one split.
    pub fn used_features(&self) -> Vec<usize> {
        let mut used = vec![false; self.n_features];
        fn walk(node: &Node, used: &mut [bool]) {
            if let Node::Split {
                feature_index,
                left,
                right,
                ..
            } = node
            {
                used[*feature_index] = true;
                walk(left, used);
                walk(right, used);
            }
        }
        walk(&self.root, &mut used);
        (0..self.n_features).filter(|&i| used[i]).collect()
    }
}

/// Fit a CART regression tree by greedy recursive partitioning. At each node
/// the (feature, threshold) pair maximizing the decrease in total sum of
/// squared deviations wins; candidate thresholds are midpoints between
/// consecutive distinct sorted feature values. Ties break toward the lowest
/// feature index, then the lowest threshold.
pub fn fit_tree(data: &Dataset, config: &TreeConfig) -> Result<RegressionTree> {
    config.validate(data.n_features())?;
    if data.n_rows() == 0 {
        return Err(Error::EmptyData);
    }
    let mut rng = config
        .max_features
        .filter(|&m| m < data.n_features())
        .map(|_| RandomSource::new(config.seed));
    let indices: Vec<usize> = (0..data.n_rows()).collect();
    let root = grow(data, &indices, 0, config, &mut rng);
    Ok(RegressionTree {
        n_features: data.n_features(),
        root,
    })
}

struct BestSplit {
    feature: usize,
    threshold: f64,
    left: Vec<usize>,
    right: Vec<usize>,
}

fn grow(
    data: &Dataset,
    indices: &[usize],
    depth: usize,
    config: &TreeConfig,
    rng: &mut Option<RandomSource>,
) -> Node {
    let m = indices.len();
    let sum: f64 = indices.iter().map(|&i| data.outcomes()[i]).sum();
    let mean = sum / m as f64;
    let leaf = Node::Leaf {
        prediction: mean,
        n_leaf: m,
    };

    if m < config.min_samples_split {
        return leaf;
    }
    if let Some(limit) = config.max_depth {
        if depth >= limit {
            return leaf;
        }
    }
    let (y_min, y_max) = indices.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &i| {
        let y = data.outcomes()[i];
        (lo.min(y), hi.max(y))
    });
    if y_max - y_min <= PURE_NODE_TOLERANCE {
        return leaf;
    }

    let node_sse: f64 = indices
        .iter()
        .map(|&i| {
            let d = data.outcomes()[i] - mean;
            d * d
        })
        .sum();
    let guard = PURITY_GUARD * (node_sse / m as f64);

    match best_split(data, indices, node_sse, guard, config, rng) {
        None => leaf,
        Some(split) => Node::Split {
            feature_index: split.feature,
            threshold: split.threshold,
            left: Box::new(grow(data, &split.left, depth + 1, config, rng)),
            right: Box::new(grow(data, &split.right, depth + 1, config, rng)),
        },
    }
}

fn candidate_features(p: usize, config: &TreeConfig, rng: &mut Option<RandomSource>) -> Vec<usize> {
    match (config.max_features, rng) {
        (Some(m), Some(rng)) if m < p => rng.sample_without_replacement(p, m),
        _ => (0..p).collect(),
    }
}

fn best_split(
    data: &Dataset,
    indices: &[usize],
    node_sse: f64,
    guard: f64,
    config: &TreeConfig,
    rng: &mut Option<RandomSource>,
) -> Option<BestSplit> {
    let m = indices.len();
    let mut best: Option<(usize, f64, f64)> = None; // (feature, threshold, reduction)

    let mut order: Vec<usize> = indices.to_vec();
    for feature in candidate_features(data.n_features(), config, rng) {
        order.sort_by(|&a, &b| data.row(a)[feature].total_cmp(&data.row(b)[feature]));

        // prefix sums over the sorted order give O(1) impurity per candidate
        let mut left_sum = 0.0;
        let mut left_sq = 0.0;
        let total_sum: f64 = order.iter().map(|&i| data.outcomes()[i]).sum();
        let total_sq: f64 = order.iter().map(|&i| data.outcomes()[i] * data.outcomes()[i]).sum();

        for pos in 0..m - 1 {
            let y = data.outcomes()[order[pos]];
            left_sum += y;
            left_sq += y * y;

            let x_here = data.row(order[pos])[feature];
            let x_next = data.row(order[pos + 1])[feature];
            if x_next <= x_here {
                continue; // not a boundary between distinct values
            }
            let n_left = pos + 1;
            let n_right = m - n_left;
            if n_left < config.min_samples_leaf || n_right < config.min_samples_leaf {
                continue;
            }
            let threshold = x_here + (x_next - x_here) / 2.0;
            if threshold <= x_here || threshold >= x_next {
                continue; // midpoint collapsed onto a value; cannot separate
            }
            let right_sum = total_sum - left_sum;
            let right_sq = total_sq - left_sq;
            let sse_left = left_sq - left_sum * left_sum / n_left as f64;
            let sse_right = right_sq - right_sum * right_sum / n_right as f64;
            let reduction = node_sse - sse_left - sse_right;
            if reduction <= guard {
                continue;
            }
            // strict '>' keeps the first (lowest feature, lowest threshold) winner
            let improves = match best {
                None => true,
                Some((_, _, best_red)) => reduction > best_red,
            };
            if improves {
                best = Some((feature, threshold, reduction));
            }
        }
    }

    best.map(|(feature, threshold, _)| {
        let mut left = Vec::new();
        let mut right = Vec::new();
        for &i in indices {
            if data.row(i)[feature] <= threshold {
                left.push(i);
            } else {
                right.push(i);
            }
        }
        BestSplit {
            feature,
            threshold,
            left,
            right,
        }
    })
}

/// Predict the outcome for one feature vector by routing it to its leaf:
/// left when `x[feature_index] <= threshold`.
pub fn predict_tree(tree: &RegressionTree, x: &[f64]) -> Result<f64> {
    if x.len() != tree.n_features {
        return Err(Error::DimensionMismatch {
            expected: tree.n_features,
            actual: x.len(),
        });
    }
    if x.iter().any(|v| v.is_nan()) {
        return Err(Error::InvalidData("query point contains NaN".into()));
    }
    let mut node = &tree.root;
    loop {
        match node {
            Node::Leaf { prediction, .. } => return Ok(*prediction),
            Node::Split {
                feature_index,
                threshold,
                left,
                right,
            } => {
                node = if x[*feature_index] <= *threshold { left } else { right };
            }
        }
    }
}
