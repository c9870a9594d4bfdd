//! The weighted sum-of-trees model: one base learner per training group,
//! combined with the stage-1 similarity weights.

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::forest::{fit_forest, predict_forest, RandomForest};
use crate::numerics::RandomSource;
use crate::stage1::{
    fit_classifier, group_averaged_weights, predict_weights, GroupClassifier, Stage1Kind,
    WeightVector,
};
use crate::tree::{fit_tree, predict_tree, RegressionTree, TreeConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BaseKind {
    Tree,
    Forest,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BaseLearner {
    Tree(RegressionTree),
    Forest(RandomForest),
}

impl BaseLearner {
    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        match self {
            BaseLearner::Tree(t) => predict_tree(t, x),
            BaseLearner::Forest(f) => predict_forest(f, x),
        }
    }
}

/// How to weight test rows: a fresh weight vector per point, or one vector
/// averaged over the whole group and shared by every row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PredictionMode {
    PerPoint,
    GroupAveraged,
}

/// The fitted two-stage model: J per-group base learners plus the stage-1
/// classifier whose probabilities weight them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedEnsemble {
    base_kind: BaseKind,
    learners: Vec<BaseLearner>,
    classifier: GroupClassifier,
    group_labels: Vec<String>,
    tree_config: TreeConfig,
    forest_size: usize,
}

impl WeightedEnsemble {
    pub fn n_learners(&self) -> usize {
        self.learners.len()
    }

    pub fn base_kind(&self) -> BaseKind {
        self.base_kind
    }

    pub fn learners(&self) -> &[BaseLearner] {
        &self.learners
    }

    pub fn classifier(&self) -> &GroupClassifier {
        &self.classifier
    }

    pub fn group_labels(&self) -> &[String] {
        &self.group_labels
    }

    pub fn n_features(&self) -> usize {
        self.classifier.n_features()
    }

    pub fn forest_size(&self) -> usize {
        self.forest_size
    }

    /// Test hook: rebuild with a shifted classifier (softmax invariance checks).
    pub fn classifier_mut(&mut self) -> &mut GroupClassifier {
        &mut self.classifier
    }
}

/// Fit the two-stage model: the stage-1 classifier on (X -> group), then one
/// base learner per training group on that group's rows only. Groups smaller
/// than `min_samples_split` yield single-leaf (group-mean) learners.
pub fn fit_ensemble(
    data: &Dataset,
    base_kind: BaseKind,
    stage1_kind: Stage1Kind,
    tree_config: &TreeConfig,
    forest_size: usize,
    rng: &RandomSource,
) -> Result<WeightedEnsemble> {
    let group_labels = data.group_labels();
    if group_labels.len() < 2 {
        return Err(Error::SingleGroup);
    }
    if base_kind == BaseKind::Forest && forest_size < 1 {
        return Err(Error::InvalidParameter(
            "forest_size must be at least 1".into(),
        ));
    }
    let classifier = fit_classifier(data, stage1_kind)?;

    let mut learners = Vec::with_capacity(group_labels.len());
    for (j, label) in group_labels.iter().enumerate() {
        let rows = data.group_rows(label);
        let group_data = data.subset(&rows)?;
        let learner = match base_kind {
            BaseKind::Tree => BaseLearner::Tree(fit_tree(&group_data, tree_config)?),
            BaseKind::Forest => {
                let child = rng.child(j as u64);
                BaseLearner::Forest(fit_forest(&group_data, forest_size, tree_config, true, &child)?)
            }
        };
        learners.push(learner);
    }
    Ok(WeightedEnsemble {
        base_kind,
        learners,
        classifier,
        group_labels,
        tree_config: tree_config.clone(),
        forest_size,
    })
}

/// Combine the learners with an explicit weight vector: `sum_j w_j T_j(x)`.
pub fn predict_with_weights(ens: &WeightedEnsemble, weights: &WeightVector, x: &[f64]) -> Result<f64> {
    if weights.len() != ens.learners.len() {
        return Err(Error::DimensionMismatch {
            expected: ens.learners.len(),
            actual: weights.len(),
        });
    }
    let mut total = 0.0;
    for (w, learner) in weights.values().iter().zip(&ens.learners) {
        total += w * learner.predict(x)?;
    }
    Ok(total)
}

/// Predict one point with weights computed from the point itself.
pub fn predict_point(ens: &WeightedEnsemble, x: &[f64]) -> Result<f64> {
    let weights = predict_weights(&ens.classifier, x)?;
    predict_with_weights(ens, &weights, x)
}

/// Predict a block of rows that belong to one unseen group.
///
/// Group-averaged mode computes a single shared weight vector (the mean of
/// the per-row weights) and applies it to every row; per-point mode weights
/// each row independently.
pub fn predict_group(
    ens: &WeightedEnsemble,
    rows: &[&[f64]],
    mode: PredictionMode,
) -> Result<Vec<f64>> {
    if rows.is_empty() {
        return Err(Error::EmptyData);
    }
    match mode {
        PredictionMode::PerPoint => rows.iter().map(|x| predict_point(ens, x)).collect(),
        PredictionMode::GroupAveraged => {
            let shared = group_averaged_weights(&ens.classifier, rows.iter().copied())?;
            rows.iter()
                .map(|x| predict_with_weights(ens, &shared, x))
                .collect()
        }
    }
}

/// The shared weight vector group-averaged mode would use for these rows.
pub fn shared_weights(ens: &WeightedEnsemble, rows: &[&[f64]]) -> Result<WeightVector> {
    group_averaged_weights(&ens.classifier, rows.iter().copied())
}
