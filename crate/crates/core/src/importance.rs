//! Variable importance (permutation) and pairwise variable interaction
//! (Friedman's H-squared on partial-dependence grids), plus the weighted
//! combination that predicts VIVI structure for out-of-sample groups.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bench::mse;
use crate::data::Dataset;
use crate::ensemble::{predict_point, WeightedEnsemble};
use crate::error::{Error, Result};
use crate::forest::{predict_forest, RandomForest};
use crate::numerics::RandomSource;
use crate::stage1::WeightVector;
use crate::tree::{predict_tree, RegressionTree};

/// Anything that maps a feature vector to a real prediction.
pub trait Predictor: Sync {
    fn n_features(&self) -> usize;
    fn predict_row(&self, x: &[f64]) -> Result<f64>;
}

impl Predictor for RegressionTree {
    fn n_features(&self) -> usize {
        RegressionTree::n_features(self)
    }

    fn predict_row(&self, x: &[f64]) -> Result<f64> {
        predict_tree(self, x)
    }
}

impl Predictor for RandomForest {
    fn n_features(&self) -> usize {
        RandomForest::n_features(self)
    }

    fn predict_row(&self, x: &[f64]) -> Result<f64> {
        predict_forest(self, x)
    }
}

impl Predictor for WeightedEnsemble {
    fn n_features(&self) -> usize {
        WeightedEnsemble::n_features(self)
    }

    fn predict_row(&self, x: &[f64]) -> Result<f64> {
        predict_point(self, x)
    }
}

/// Permutation importances: raw mean MSE increases and their non-negative
/// clamped counterparts.
#[derive(Debug, Clone)]
pub struct PermutationImportance {
    pub raw: Vec<f64>,
    pub clamped: Vec<f64>,
}

/// Mean over `repeats` of `MSE(y, model(X with column f permuted)) -
/// MSE(y, model(X))` per feature. A feature no split ever routes on leaves
/// predictions unchanged, so its importance is exactly zero.
pub fn permutation_importance<M: Predictor>(
    model: &M,
    data: &Dataset,
    repeats: usize,
    rng: &mut RandomSource,
) -> Result<PermutationImportance> {
    if data.n_features() != model.n_features() {
        return Err(Error::DimensionMismatch {
            expected: model.n_features(),
            actual: data.n_features(),
        });
    }
    if repeats < 1 {
        return Err(Error::InvalidParameter("repeats must be at least 1".into()));
    }
    let baseline_pred: Vec<f64> = data
        .rows()
        .map(|x| model.predict_row(x))
        .collect::<Result<_>>()?;
    let baseline = mse(data.outcomes(), &baseline_pred)?;

    let n = data.n_rows();
    let p = data.n_features();
    let mut raw = vec![0.0; p];
    let mut buffer: Vec<f64> = data.rows().flatten().copied().collect();
    for feature in 0..p {
        let mut total = 0.0;
        for _ in 0..repeats {
            let mut permuted: Vec<f64> = (0..n).map(|i| data.row(i)[feature]).collect();
            rng.shuffle(&mut permuted);
            for i in 0..n {
                buffer[i * p + feature] = permuted[i];
            }
            let pred: Vec<f64> = buffer
                .chunks_exact(p)
                .map(|x| model.predict_row(x))
                .collect::<Result<_>>()?;
            total += mse(data.outcomes(), &pred)? - baseline;
        }
        // restore the original column before moving on
        for i in 0..n {
            buffer[i * p + feature] = data.row(i)[feature];
        }
        raw[feature] = total / repeats as f64;
    }
    let clamped = raw.iter().map(|&v| v.max(0.0)).collect();
    Ok(PermutationImportance { raw, clamped })
}

/// Evaluation grid for one feature: `grid_size` empirical quantiles, capped
/// at the number of distinct values.
fn feature_grid(data: &Dataset, feature: usize, grid_size: usize) -> Vec<f64> {
    let mut values: Vec<f64> = (0..data.n_rows()).map(|i| data.row(i)[feature]).collect();
    values.sort_by(f64::total_cmp);
    values.dedup();
    if values.len() <= grid_size {
        return values;
    }
    let mut grid: Vec<f64> = (0..grid_size)
        .map(|g| {
            let q = g as f64 / (grid_size - 1) as f64;
            let h = (values.len() - 1) as f64 * q;
            values[h.round() as usize]
        })
        .collect();
    grid.dedup();
    grid
}

/// Centered partial dependence of one feature over its grid.
fn partial_dependence_1d<M: Predictor>(
    model: &M,
    data: &Dataset,
    feature: usize,
    grid: &[f64],
) -> Result<Vec<f64>> {
    let p = data.n_features();
    let mut buffer: Vec<f64> = data.rows().flatten().copied().collect();
    let mut pd = Vec::with_capacity(grid.len());
    for &value in grid {
        for i in 0..data.n_rows() {
            buffer[i * p + feature] = value;
        }
        let mut total = 0.0;
        for x in buffer.chunks_exact(p) {
            total += model.predict_row(x)?;
        }
        pd.push(total / data.n_rows() as f64);
    }
    center(&mut pd);
    Ok(pd)
}

fn center(values: &mut [f64]) {
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    values.iter_mut().for_each(|v| *v -= mean);
}

/// H-squared statistic for one feature pair from centered one- and
/// two-dimensional partial-dependence functions on the quantile grids.
fn h_squared_pair<M: Predictor>(
    model: &M,
    data: &Dataset,
    fi: usize,
    fj: usize,
    grid_i: &[f64],
    grid_j: &[f64],
    pd_i: &[f64],
    pd_j: &[f64],
) -> Result<f64> {
    let p = data.n_features();
    let mut buffer: Vec<f64> = data.rows().flatten().copied().collect();
    let mut pd_ij = vec![0.0; grid_i.len() * grid_j.len()];
    for (a, &vi) in grid_i.iter().enumerate() {
        for i in 0..data.n_rows() {
            buffer[i * p + fi] = vi;
        }
        for (b, &vj) in grid_j.iter().enumerate() {
            for i in 0..data.n_rows() {
                buffer[i * p + fj] = vj;
            }
            let mut total = 0.0;
            for x in buffer.chunks_exact(p) {
                total += model.predict_row(x)?;
            }
            pd_ij[a * grid_j.len() + b] = total / data.n_rows() as f64;
        }
        // restore the j column for the next i value
        for i in 0..data.n_rows() {
            buffer[i * p + fj] = data.row(i)[fj];
        }
    }
    center(&mut pd_ij);

    let mut numerator = 0.0;
    let mut denominator = 0.0;
    for (a, &pi) in pd_i.iter().enumerate() {
        for (b, &pj) in pd_j.iter().enumerate() {
            let joint = pd_ij[a * grid_j.len() + b];
            let interaction = joint - pi - pj;
            numerator += interaction * interaction;
            denominator += joint * joint;
        }
    }
    if denominator < 1e-12 {
        return Ok(0.0);
    }
    Ok((numerator / denominator).clamp(0.0, 1.0))
}

/// Pairwise interaction matrix (zero diagonal). Constant features get zero
/// rows/columns with a recorded warning. Feature pairs are evaluated in
/// parallel; the result does not depend on scheduling.
pub fn pairwise_interaction<M: Predictor>(
    model: &M,
    data: &Dataset,
    grid_size: usize,
) -> Result<(Vec<f64>, Vec<String>)> {
    if data.n_features() != model.n_features() {
        return Err(Error::DimensionMismatch {
            expected: model.n_features(),
            actual: data.n_features(),
        });
    }
    if grid_size < 2 {
        return Err(Error::InvalidParameter("grid_size must be at least 2".into()));
    }
    let p = data.n_features();
    let grids: Vec<Vec<f64>> = (0..p).map(|f| feature_grid(data, f, grid_size)).collect();
    let mut warnings = Vec::new();
    for f in 0..p {
        if grids[f].len() < 2 {
            warnings.push(format!(
                "feature '{}' is constant; its interactions are reported as 0",
                data.feature_names()[f]
            ));
        }
    }
    let pds: Vec<Option<Vec<f64>>> = (0..p)
        .map(|f| {
            if grids[f].len() < 2 {
                Ok(None)
            } else {
                partial_dependence_1d(model, data, f, &grids[f]).map(Some)
            }
        })
        .collect::<Result<_>>()?;

    let pairs: Vec<(usize, usize)> = (0..p)
        .flat_map(|i| ((i + 1)..p).map(move |j| (i, j)))
        .collect();
    let values: Vec<f64> = pairs
        .par_iter()
        .map(|&(i, j)| match (&pds[i], &pds[j]) {
            (Some(pd_i), Some(pd_j)) => {
                h_squared_pair(model, data, i, j, &grids[i], &grids[j], pd_i, pd_j)
            }
            _ => Ok(0.0),
        })
        .collect::<Result<_>>()?;

    let mut matrix = vec![0.0; p * p];
    for (&(i, j), &h2) in pairs.iter().zip(&values) {
        matrix[i * p + j] = h2;
        matrix[j * p + i] = h2;
    }
    Ok((matrix, warnings))
}

/// Symmetric p x p matrix with per-feature importance on the diagonal and
/// pairwise interaction strength off it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViviMatrix {
    feature_names: Vec<String>,
    /// Row-major p x p.
    values: Vec<f64>,
}

impl ViviMatrix {
    pub fn new(feature_names: Vec<String>, values: Vec<f64>) -> Result<Self> {
        let p = feature_names.len();
        if values.len() != p * p {
            return Err(Error::DimensionMismatch {
                expected: p * p,
                actual: values.len(),
            });
        }
        for i in 0..p {
            for j in (i + 1)..p {
                if (values[i * p + j] - values[j * p + i]).abs() > 1e-12 {
                    return Err(Error::InvalidParameter(format!(
                        "interaction matrix asymmetric at ({i}, {j})"
                    )));
                }
            }
        }
        if values.iter().any(|v| *v < 0.0 || !v.is_finite()) {
            return Err(Error::InvalidParameter(
                "vivi entries must be finite and non-negative".into(),
            ));
        }
        Ok(Self {
            feature_names,
            values,
        })
    }

    /// Assemble from an importance vector (diagonal) and an interaction
    /// matrix (off-diagonal part).
    pub fn from_parts(
        feature_names: Vec<String>,
        importance: &[f64],
        interaction: &[f64],
    ) -> Result<Self> {
        let p = feature_names.len();
        if importance.len() != p {
            return Err(Error::DimensionMismatch {
                expected: p,
                actual: importance.len(),
            });
        }
        let mut values = interaction.to_vec();
        if values.len() != p * p {
            return Err(Error::DimensionMismatch {
                expected: p * p,
                actual: values.len(),
            });
        }
        for (i, &imp) in importance.iter().enumerate() {
            values[i * p + i] = imp;
        }
        Self::new(feature_names, values)
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.feature_names.len() + j]
    }

    /// Emit the heatmap-ready CSV: a header row of feature names and one row
    /// per feature.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        let mut header = vec!["feature".to_string()];
        header.extend(self.feature_names.iter().cloned());
        wtr.write_record(&header).map_err(|e| Error::Csv {
            path: "<vivi>".into(),
            message: e.to_string(),
        })?;
        let p = self.feature_names.len();
        for i in 0..p {
            let mut record = vec![self.feature_names[i].clone()];
            record.extend((0..p).map(|j| crate::data::format_float(self.get(i, j))));
            wtr.write_record(&record).map_err(|e| Error::Csv {
                path: "<vivi>".into(),
                message: e.to_string(),
            })?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// Full VIVI output for one model: the display matrix (clamped importances
/// on the diagonal, H-squared off it), the raw signed importances, and any
/// warnings.
#[derive(Debug, Clone)]
pub struct ViviReport {
    pub matrix: ViviMatrix,
    pub raw_importance: Vec<f64>,
    pub warnings: Vec<String>,
}

/// Compute the full VIVI matrix for one model: permutation importance on the
/// diagonal, H-squared interactions off it.
pub fn vivi_matrix<M: Predictor>(
    model: &M,
    data: &Dataset,
    repeats: usize,
    grid_size: usize,
    rng: &mut RandomSource,
) -> Result<ViviReport> {
    let importance = permutation_importance(model, data, repeats, rng)?;
    let (interaction, warnings) = pairwise_interaction(model, data, grid_size)?;
    let matrix = ViviMatrix::from_parts(
        data.feature_names().to_vec(),
        &importance.clamped,
        &interaction,
    )?;
    Ok(ViviReport {
        matrix,
        raw_importance: importance.raw,
        warnings,
    })
}

/// Element-wise weighted sum of per-group VIVI matrices: the predicted VIVI
/// structure for an out-of-sample group.
pub fn weighted_vivi(vivis: &[ViviMatrix], weights: &WeightVector) -> Result<ViviMatrix> {
    if vivis.is_empty() {
        return Err(Error::EmptyData);
    }
    if vivis.len() != weights.len() {
        return Err(Error::DimensionMismatch {
            expected: vivis.len(),
            actual: weights.len(),
        });
    }
    let names = vivis[0].feature_names().to_vec();
    for m in vivis {
        if m.feature_names() != names.as_slice() {
            return Err(Error::FeatureMismatch(
                "vivi matrices disagree on feature names or order".into(),
            ));
        }
    }
    let mut values = vec![0.0; names.len() * names.len()];
    for (matrix, &w) in vivis.iter().zip(weights.values()) {
        for (acc, v) in values.iter_mut().zip(matrix.values()) {
            *acc += w * v;
        }
    }
    ViviMatrix::new(names, values)
}
