//! Shared test oracles and fixtures. Everything here is independent of the
//! implementation paths it checks: the split oracle enumerates candidates by
//! brute force and scores them with two-pass arithmetic.

#![allow(dead_code)]

use clustree::data::Dataset;
use clustree::numerics::RandomSource;
use clustree::tree::{Node, RegressionTree};

/// Sum of squared deviations from the mean, two-pass.
pub fn sse(values: &[f64]) -> f64 {
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    values.iter().map(|v| (v - mean) * (v - mean)).sum()
}

/// Exhaustive best split: every feature, every midpoint between consecutive
/// distinct sorted values, scored by the decrease in total SSE. Returns
/// `(feature, threshold, reduction)` of the best candidate, or None when no
/// candidate strictly reduces the impurity.
pub fn brute_force_best_split(
    data: &Dataset,
    indices: &[usize],
    min_samples_leaf: usize,
) -> Option<(usize, f64, f64)> {
    let ys: Vec<f64> = indices.iter().map(|&i| data.outcomes()[i]).collect();
    let parent = sse(&ys);
    let mut best: Option<(usize, f64, f64)> = None;
    for feature in 0..data.n_features() {
        let mut values: Vec<f64> = indices.iter().map(|&i| data.row(i)[feature]).collect();
        values.sort_by(f64::total_cmp);
        values.dedup();
        for pair in values.windows(2) {
            let threshold = pair[0] + (pair[1] - pair[0]) / 2.0;
            if threshold <= pair[0] || threshold >= pair[1] {
                continue;
            }
            let left: Vec<f64> = indices
                .iter()
                .filter(|&&i| data.row(i)[feature] <= threshold)
                .map(|&i| data.outcomes()[i])
                .collect();
            let right: Vec<f64> = indices
                .iter()
                .filter(|&&i| data.row(i)[feature] > threshold)
                .map(|&i| data.outcomes()[i])
                .collect();
            if left.len() < min_samples_leaf || right.len() < min_samples_leaf {
                continue;
            }
            let reduction = parent - sse(&left) - sse(&right);
            if reduction <= 0.0 {
                continue;
            }
            let better = match best {
                None => true,
                Some((_, _, r)) => reduction > r,
            };
            if better {
                best = Some((feature, threshold, reduction));
            }
        }
    }
    best
}

/// Walk a fitted tree and check that every internal node's achieved impurity
/// reduction matches the brute-force optimum within `tolerance`. Returns the
/// number of internal nodes checked.
pub fn check_split_oracle(
    tree: &RegressionTree,
    data: &Dataset,
    tolerance: f64,
) -> Result<usize, String> {
    fn walk(
        node: &Node,
        data: &Dataset,
        indices: &[usize],
        tolerance: f64,
        checked: &mut usize,
    ) -> Result<(), String> {
        let Node::Split {
            feature_index,
            threshold,
            left,
            right,
        } = node
        else {
            return Ok(());
        };
        let (left_idx, right_idx): (Vec<usize>, Vec<usize>) = indices
            .iter()
            .partition(|&&i| data.row(i)[*feature_index] <= *threshold);
        if left_idx.is_empty() || right_idx.is_empty() {
            return Err(format!(
                "split on feature {feature_index} at {threshold} routes all rows one way"
            ));
        }
        let ys: Vec<f64> = indices.iter().map(|&i| data.outcomes()[i]).collect();
        let left_ys: Vec<f64> = left_idx.iter().map(|&i| data.outcomes()[i]).collect();
        let right_ys: Vec<f64> = right_idx.iter().map(|&i| data.outcomes()[i]).collect();
        let achieved = sse(&ys) - sse(&left_ys) - sse(&right_ys);
        let (_, _, best) = brute_force_best_split(data, indices, 1)
            .ok_or_else(|| "tree split where the oracle finds no valid candidate".to_string())?;
        if (achieved - best).abs() > tolerance {
            return Err(format!(
                "node split reduction {achieved} differs from oracle best {best}"
            ));
        }
        *checked += 1;
        walk(left, data, &left_idx, tolerance, checked)?;
        walk(right, data, &right_idx, tolerance, checked)
    }

    let indices: Vec<usize> = (0..data.n_rows()).collect();
    let mut checked = 0;
    walk(tree.root(), data, &indices, tolerance, &mut checked)?;
    Ok(checked)
}

/// Random regression dataset with `n` rows and `p` continuous features;
/// outcomes mix a linear signal with noise so trees have real structure to
/// find.
pub fn random_dataset(rng: &mut RandomSource, n: usize, p: usize) -> Dataset {
    let mut features = Vec::with_capacity(n * p);
    let mut outcomes = Vec::with_capacity(n);
    for _ in 0..n {
        let row: Vec<f64> = (0..p).map(|_| rng.uniform(0.0, 1.0)).collect();
        let signal: f64 = row.iter().enumerate().map(|(j, v)| (j + 1) as f64 * v).sum();
        outcomes.push(signal + 0.3 * rng.standard_normal());
        features.extend(row);
    }
    let names = (0..p).map(|j| format!("x{j}")).collect();
    Dataset::new(features, outcomes, vec!["g".to_string(); n], names).unwrap()
}

/// Build a dataset from explicit rows.
pub fn dataset_from_rows(xs: &[Vec<f64>], ys: &[f64], groups: &[String]) -> Dataset {
    let p = xs[0].len();
    let features: Vec<f64> = xs.iter().flat_map(|r| r.iter().copied()).collect();
    let names = (0..p).map(|j| format!("x{j}")).collect();
    Dataset::new(features, ys.to_vec(), groups.to_vec(), names).unwrap()
}

/// Normal density, for checking naive-Bayes posteriors directly.
pub fn gaussian_density(x: f64, mean: f64, variance: f64) -> f64 {
    let d = x - mean;
    (-0.5 * d * d / variance).exp() / (2.0 * std::f64::consts::PI * variance).sqrt()
}
