//! Bagged random-forest regression built on CART trees.

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::numerics::RandomSource;
use crate::tree::{fit_tree, predict_tree, RegressionTree, TreeConfig};

/// A fitted forest: the mean of its member trees.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomForest {
    trees: Vec<RegressionTree>,
    bootstrap: bool,
    tree_seeds: Vec<u64>,
}

impl RandomForest {
    pub fn n_trees(&self) -> usize {
        self.trees.len()
    }

    pub fn trees(&self) -> &[RegressionTree] {
        &self.trees
    }

    pub fn bootstrap(&self) -> bool {
        self.bootstrap
    }

    pub fn tree_seeds(&self) -> &[u64] {
        &self.tree_seeds
    }

    pub fn n_features(&self) -> usize {
        self.trees[0].n_features()
    }
}

/// Fit `n_trees` trees, each on a bootstrap resample of `data` (`n_obs`
/// draws with replacement) when `bootstrap` is true, on the full data
/// otherwise. Tree `t` derives its own child source from `rng`, so the
/// result is independent of fitting order.
pub fn fit_forest(
    data: &Dataset,
    n_trees: usize,
    config: &TreeConfig,
    bootstrap: bool,
    rng: &RandomSource,
) -> Result<RandomForest> {
    if n_trees < 1 {
        return Err(Error::InvalidParameter(
            "a forest needs at least one tree".into(),
        ));
    }
    if data.n_rows() == 0 {
        return Err(Error::EmptyData);
    }
    let mut trees = Vec::with_capacity(n_trees);
    let mut tree_seeds = Vec::with_capacity(n_trees);
    for t in 0..n_trees {
        let mut child = rng.child(t as u64);
        tree_seeds.push(child.seed());
        let sample = if bootstrap {
            let indices: Vec<usize> = (0..data.n_rows()).map(|_| child.index(data.n_rows())).collect();
            data.subset(&indices)?
        } else {
            data.clone()
        };
        let tree_config = TreeConfig {
            seed: child.seed(),
            ..config.clone()
        };
        trees.push(fit_tree(&sample, &tree_config)?);
    }
    Ok(RandomForest {
        trees,
        bootstrap,
        tree_seeds,
    })
}

/// Arithmetic mean of the member-tree predictions.
pub fn predict_forest(forest: &RandomForest, x: &[f64]) -> Result<f64> {
    let mut sum = 0.0;
    for tree in &forest.trees {
        sum += predict_tree(tree, x)?;
    }
    Ok(sum / forest.trees.len() as f64)
}
