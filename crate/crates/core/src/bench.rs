//! Comparative benchmark harness: fit every requested method on replicated
//! simulated datasets, score standardized-outcome MSE, and record wall-clock
//! fit/predict times.

use std::io::Write;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::ensemble::{
    fit_ensemble, predict_group, BaseKind, PredictionMode, WeightedEnsemble,
};
use crate::error::{Error, Result};
use crate::forest::{fit_forest, predict_forest, RandomForest};
use crate::numerics::RandomSource;
use crate::simgen::{generate, Dgp, Setting, SimConfig};
use crate::stage1::Stage1Kind;
use crate::tree::{fit_tree, predict_tree, RegressionTree, TreeConfig};

/// The methods the harness can run. The random-forest comparator always uses
/// exactly J trees; the sum-of-forests uses J forests of J trees each, where
/// J is the number of training groups.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    DecisionTree,
    #[serde(rename = "random-forest-J")]
    RandomForestJ,
    WeightedSumOfTrees,
    WeightedSumOfForests,
}

impl Method {
    pub const ALL: [Method; 4] = [
        Method::DecisionTree,
        Method::RandomForestJ,
        Method::WeightedSumOfTrees,
        Method::WeightedSumOfForests,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Method::DecisionTree => "decision-tree",
            Method::RandomForestJ => "random-forest-J",
            Method::WeightedSumOfTrees => "weighted-sum-of-trees",
            Method::WeightedSumOfForests => "weighted-sum-of-forests",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "decision-tree" => Ok(Method::DecisionTree),
            "random-forest-J" | "random-forest-j" => Ok(Method::RandomForestJ),
            "weighted-sum-of-trees" => Ok(Method::WeightedSumOfTrees),
            "weighted-sum-of-forests" => Ok(Method::WeightedSumOfForests),
            other => Err(format!("unknown method '{other}'")),
        }
    }
}

/// Grid of simulation configurations plus the methods and replicate count to
/// run on each.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BenchmarkSpec {
    pub setting: Setting,
    /// Data-generating processes; setting 3 only.
    #[serde(default)]
    pub dgps: Vec<Dgp>,
    pub n_values: Vec<usize>,
    pub k_values: Vec<usize>,
    /// Random-effect scales; settings 1–2 only.
    #[serde(default)]
    pub sigma_alphas: Vec<f64>,
    pub replicates: usize,
    pub methods: Vec<Method>,
    pub seed: u64,
}

impl BenchmarkSpec {
    pub fn validate(&self) -> Result<()> {
        if self.replicates < 1 {
            return Err(Error::InvalidParameter("replicates must be at least 1".into()));
        }
        if self.methods.is_empty() {
            return Err(Error::InvalidParameter("method set must be non-empty".into()));
        }
        if self.n_values.is_empty() || self.k_values.is_empty() {
            return Err(Error::InvalidParameter("n and K grids must be non-empty".into()));
        }
        match self.setting {
            Setting::Three => {
                if self.dgps.is_empty() {
                    return Err(Error::InvalidParameter(
                        "setting 3 requires at least one dgp".into(),
                    ));
                }
                if !self.sigma_alphas.is_empty() {
                    return Err(Error::InvalidParameter(
                        "sigma_alpha applies to settings 1 and 2 only".into(),
                    ));
                }
            }
            Setting::One | Setting::Two => {
                if self.sigma_alphas.is_empty() {
                    return Err(Error::InvalidParameter(
                        "settings 1 and 2 require at least one sigma_alpha".into(),
                    ));
                }
                if !self.dgps.is_empty() {
                    return Err(Error::InvalidParameter("dgp applies to setting 3 only".into()));
                }
            }
        }
        Ok(())
    }

    /// Grid cells in their fixed enumeration order: dgp, then n, then K,
    /// then sigma_alpha.
    pub fn cells(&self) -> Vec<GridCell> {
        let dgps: Vec<Option<Dgp>> = if self.dgps.is_empty() {
            vec![None]
        } else {
            self.dgps.iter().copied().map(Some).collect()
        };
        let sigmas: Vec<Option<f64>> = if self.sigma_alphas.is_empty() {
            vec![None]
        } else {
            self.sigma_alphas.iter().copied().map(Some).collect()
        };
        let mut cells = Vec::new();
        for &dgp in &dgps {
            for &n in &self.n_values {
                for &k in &self.k_values {
                    for &sigma_alpha in &sigmas {
                        cells.push(GridCell {
                            setting: self.setting,
                            dgp,
                            n,
                            k,
                            sigma_alpha,
                        });
                    }
                }
            }
        }
        cells
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridCell {
    pub setting: Setting,
    pub dgp: Option<Dgp>,
    pub n: usize,
    pub k: usize,
    pub sigma_alpha: Option<f64>,
}

/// One benchmark measurement. Failed cells carry the error message and NaN
/// markers in the numeric columns.
#[derive(Debug, Clone)]
pub struct BenchmarkRow {
    pub cell: GridCell,
    pub replicate: usize,
    pub method: Method,
    pub mse: Option<f64>,
    pub fit_seconds: Option<f64>,
    pub predict_seconds: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone)]
pub struct BenchmarkResult {
    pub rows: Vec<BenchmarkRow>,
}

impl BenchmarkResult {
    pub fn n_failures(&self) -> usize {
        self.rows.iter().filter(|r| r.error.is_some()).count()
    }
}

/// Shift and scale both vectors by the training mean and standard deviation
/// (population formula). Errors when the training outcomes have zero
/// variance.
pub fn standardize_outcome(
    train_y: &[f64],
    test_y: &[f64],
) -> Result<(Vec<f64>, Vec<f64>, f64, f64)> {
    if train_y.is_empty() {
        return Err(Error::EmptyData);
    }
    let n = train_y.len() as f64;
    let mean = train_y.iter().sum::<f64>() / n;
    let var = train_y.iter().map(|y| (y - mean) * (y - mean)).sum::<f64>() / n;
    if var <= 0.0 {
        return Err(Error::InvalidParameter(
            "training outcomes have zero variance; cannot standardize".into(),
        ));
    }
    let std = var.sqrt();
    let scale = |v: &[f64]| v.iter().map(|y| (y - mean) / std).collect();
    Ok((scale(train_y), scale(test_y), mean, std))
}

/// Mean squared error `(1/n) sum (y_i - yhat_i)^2`.
pub fn mse(y_true: &[f64], y_pred: &[f64]) -> Result<f64> {
    if y_true.is_empty() {
        return Err(Error::EmptyData);
    }
    if y_true.len() != y_pred.len() {
        return Err(Error::DimensionMismatch {
            expected: y_true.len(),
            actual: y_pred.len(),
        });
    }
    let total: f64 = y_true
        .iter()
        .zip(y_pred)
        .map(|(t, p)| (t - p) * (t - p))
        .sum();
    Ok(total / y_true.len() as f64)
}

/// A method fitted on one training set, ready to predict a test set.
#[derive(Debug, Clone)]
pub enum FittedMethod {
    Tree(RegressionTree),
    Forest(RandomForest),
    Ensemble(WeightedEnsemble),
}

impl FittedMethod {
    /// Predict every test row. Ensemble methods use group-averaged weights
    /// shared within each test group; comparators predict row by row.
    pub fn predict_test(&self, test: &Dataset) -> Result<Vec<f64>> {
        match self {
            FittedMethod::Tree(tree) => test.rows().map(|x| predict_tree(tree, x)).collect(),
            FittedMethod::Forest(forest) => test.rows().map(|x| predict_forest(forest, x)).collect(),
            FittedMethod::Ensemble(ens) => {
                let mut predictions = vec![0.0; test.n_rows()];
                for label in test.group_labels() {
                    let indices = test.group_rows(&label);
                    let rows: Vec<&[f64]> = indices.iter().map(|&i| test.row(i)).collect();
                    let values = predict_group(ens, &rows, PredictionMode::GroupAveraged)?;
                    for (&i, v) in indices.iter().zip(values) {
                        predictions[i] = v;
                    }
                }
                Ok(predictions)
            }
        }
    }
}

/// Fit one method on pooled or per-group training data. Comparator trees and
/// forests are trained on the pooled rows ignoring group labels; ensemble
/// methods fit per group. `J` (the training group count) sizes the forests.
pub fn fit_method(method: Method, train: &Dataset, rng: &RandomSource) -> Result<FittedMethod> {
    let config = TreeConfig::default();
    let j = train.group_labels().len();
    match method {
        Method::DecisionTree => Ok(FittedMethod::Tree(fit_tree(train, &config)?)),
        Method::RandomForestJ => Ok(FittedMethod::Forest(fit_forest(
            train, j, &config, true, rng,
        )?)),
        Method::WeightedSumOfTrees => Ok(FittedMethod::Ensemble(fit_ensemble(
            train,
            BaseKind::Tree,
            Stage1Kind::MultinomialLogistic,
            &config,
            j,
            rng,
        )?)),
        Method::WeightedSumOfForests => Ok(FittedMethod::Ensemble(fit_ensemble(
            train,
            BaseKind::Forest,
            Stage1Kind::MultinomialLogistic,
            &config,
            j,
            rng,
        )?)),
    }
}

fn run_replicate(spec: &BenchmarkSpec, cell_index: usize, replicate: usize) -> Vec<BenchmarkRow> {
    let cell = spec.cells()[cell_index];
    let rep_rng = RandomSource::new(spec.seed)
        .child(cell_index as u64)
        .child(replicate as u64);
    let config = SimConfig {
        setting: cell.setting,
        dgp: cell.dgp,
        n: cell.n,
        k: cell.k,
        sigma_alpha: cell.sigma_alpha.unwrap_or(0.0),
        seed: rep_rng.seed(),
    };

    let failure = |message: String| -> Vec<BenchmarkRow> {
        spec.methods
            .iter()
            .map(|&method| BenchmarkRow {
                cell,
                replicate,
                method,
                mse: None,
                fit_seconds: None,
                predict_seconds: None,
                error: Some(message.clone()),
            })
            .collect()
    };

    let sim = match generate(&config) {
        Ok(sim) => sim,
        Err(e) => return failure(format!("generate: {e}")),
    };
    let standardized = standardize_outcome(sim.train.outcomes(), sim.test.outcomes());
    let (train_y, test_y, _, _) = match standardized {
        Ok(s) => s,
        Err(e) => return failure(format!("standardize: {e}")),
    };
    let train = match sim.train.with_outcomes(train_y) {
        Ok(d) => d,
        Err(e) => return failure(format!("standardize: {e}")),
    };

    spec.methods
        .iter()
        .enumerate()
        .map(|(m, &method)| {
            let method_rng = rep_rng.child(m as u64);
            let fit_start = Instant::now();
            let fitted = fit_method(method, &train, &method_rng);
            let fit_seconds = fit_start.elapsed().as_secs_f64();
            let outcome = fitted.and_then(|model| {
                let predict_start = Instant::now();
                let predictions = model.predict_test(&sim.test)?;
                let predict_seconds = predict_start.elapsed().as_secs_f64();
                let score = mse(&test_y, &predictions)?;
                Ok((score, predict_seconds))
            });
            match outcome {
                Ok((score, predict_seconds)) => BenchmarkRow {
                    cell,
                    replicate,
                    method,
                    mse: Some(score),
                    fit_seconds: Some(fit_seconds),
                    predict_seconds: Some(predict_seconds),
                    error: None,
                },
                Err(e) => BenchmarkRow {
                    cell,
                    replicate,
                    method,
                    mse: None,
                    fit_seconds: None,
                    predict_seconds: None,
                    error: Some(format!("{method:?}: {e}", method = method.name())),
                },
            }
        })
        .collect()
}

/// Run the full grid. Results are deterministic given `spec.seed` and
/// independent of `threads` (timing columns aside): every replicate derives
/// its seeds from its grid position alone. Each replicate runs
/// single-threaded so timing columns stay comparable.
pub fn run_benchmark(spec: &BenchmarkSpec, threads: usize) -> Result<BenchmarkResult> {
    spec.validate()?;
    let cells = spec.cells();
    let work: Vec<(usize, usize)> = (0..cells.len())
        .flat_map(|c| (1..=spec.replicates).map(move |r| (c, r)))
        .collect();

    let rows: Vec<Vec<BenchmarkRow>> = if threads <= 1 {
        work.iter().map(|&(c, r)| run_replicate(spec, c, r)).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))?;
        pool.install(|| {
            work.par_iter()
                .map(|&(c, r)| run_replicate(spec, c, r))
                .collect()
        })
    };
    Ok(BenchmarkResult {
        rows: rows.into_iter().flatten().collect(),
    })
}

fn optional_number(v: Option<f64>) -> String {
    match v {
        Some(x) => crate::data::format_float(x),
        None => "NaN".to_string(),
    }
}

/// Write the tidy per-replicate results CSV with the fixed header
/// `setting,dgp,n,K,sigma_alpha,replicate,method,mse,fit_seconds,predict_seconds`.
/// Failed cells show NaN in the numeric columns.
pub fn write_results_csv<W: Write>(result: &BenchmarkResult, writer: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record([
        "setting",
        "dgp",
        "n",
        "K",
        "sigma_alpha",
        "replicate",
        "method",
        "mse",
        "fit_seconds",
        "predict_seconds",
    ])
    .map_err(|e| Error::Csv {
        path: "<results>".into(),
        message: e.to_string(),
    })?;
    for row in &result.rows {
        wtr.write_record([
            row.cell.setting.to_string(),
            row.cell.dgp.map(|d| d.to_string()).unwrap_or_default(),
            row.cell.n.to_string(),
            row.cell.k.to_string(),
            row.cell
                .sigma_alpha
                .map(crate::data::format_float)
                .unwrap_or_default(),
            row.replicate.to_string(),
            row.method.name().to_string(),
            optional_number(row.mse),
            optional_number(row.fit_seconds),
            optional_number(row.predict_seconds),
        ])
        .map_err(|e| Error::Csv {
            path: "<results>".into(),
            message: e.to_string(),
        })?;
    }
    wtr.flush()?;
    Ok(())
}

/// Linear-interpolation quantile of already-sorted values.
fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    if sorted.len() == 1 {
        return sorted[0];
    }
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

#[derive(Debug, Clone)]
pub struct SummaryRow {
    pub cell: GridCell,
    pub method: Method,
    pub replicates_ok: usize,
    pub mse_mean: Option<f64>,
    pub mse_median: Option<f64>,
    pub mse_q1: Option<f64>,
    pub mse_q3: Option<f64>,
    pub fit_seconds_mean: Option<f64>,
    pub fit_seconds_median: Option<f64>,
    pub predict_seconds_mean: Option<f64>,
    pub predict_seconds_median: Option<f64>,
}

/// Per-configuration median/quartile summary (plot-ready for boxplots).
/// Rows appear in grid order, then method order.
pub fn summarize(spec: &BenchmarkSpec, result: &BenchmarkResult) -> Vec<SummaryRow> {
    let cells = spec.cells();
    let mut summaries = Vec::new();
    for cell in &cells {
        for &method in &spec.methods {
            let ok_rows: Vec<&BenchmarkRow> = result
                .rows
                .iter()
                .filter(|r| r.cell == *cell && r.method == method && r.error.is_none())
                .collect();
            let collect_sorted = |get: fn(&BenchmarkRow) -> Option<f64>| -> Vec<f64> {
                let mut v: Vec<f64> = ok_rows.iter().filter_map(|r| get(r)).collect();
                v.sort_by(f64::total_cmp);
                v
            };
            let mses = collect_sorted(|r| r.mse);
            let fits = collect_sorted(|r| r.fit_seconds);
            let predicts = collect_sorted(|r| r.predict_seconds);
            let mean = |v: &[f64]| -> Option<f64> {
                (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
            };
            let quant = |v: &[f64], q: f64| -> Option<f64> {
                (!v.is_empty()).then(|| quantile_sorted(v, q))
            };
            summaries.push(SummaryRow {
                cell: *cell,
                method,
                replicates_ok: ok_rows.len(),
                mse_mean: mean(&mses),
                mse_median: quant(&mses, 0.5),
                mse_q1: quant(&mses, 0.25),
                mse_q3: quant(&mses, 0.75),
                fit_seconds_mean: mean(&fits),
                fit_seconds_median: quant(&fits, 0.5),
                predict_seconds_mean: mean(&predicts),
                predict_seconds_median: quant(&predicts, 0.5),
            });
        }
    }
    summaries
}

pub fn write_summary_csv<W: Write>(summaries: &[SummaryRow], writer: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record([
        "setting",
        "dgp",
        "n",
        "K",
        "sigma_alpha",
        "method",
        "replicates_ok",
        "mse_mean",
        "mse_median",
        "mse_q1",
        "mse_q3",
        "fit_seconds_mean",
        "fit_seconds_median",
        "predict_seconds_mean",
        "predict_seconds_median",
    ])
    .map_err(|e| Error::Csv {
        path: "<summary>".into(),
        message: e.to_string(),
    })?;
    for s in summaries {
        wtr.write_record([
            s.cell.setting.to_string(),
            s.cell.dgp.map(|d| d.to_string()).unwrap_or_default(),
            s.cell.n.to_string(),
            s.cell.k.to_string(),
            s.cell
                .sigma_alpha
                .map(crate::data::format_float)
                .unwrap_or_default(),
            s.method.name().to_string(),
            s.replicates_ok.to_string(),
            optional_number(s.mse_mean),
            optional_number(s.mse_median),
            optional_number(s.mse_q1),
            optional_number(s.mse_q3),
            optional_number(s.fit_seconds_mean),
            optional_number(s.fit_seconds_median),
            optional_number(s.predict_seconds_mean),
            optional_number(s.predict_seconds_median),
        ])
        .map_err(|e| Error::Csv {
            path: "<summary>".into(),
            message: e.to_string(),
        })?;
    }
    wtr.flush()?;
    Ok(())
}
