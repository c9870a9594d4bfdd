//! First-stage group-membership classifiers. Their predicted probabilities
//! are the similarity weights used to combine the per-group learners.

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};

/// Convergence threshold on the gradient max-norm of the logistic fit.
const GRADIENT_TOLERANCE: f64 = 1e-6;
const MAX_ITERATIONS: usize = 1000;
/// L2 penalty strength on non-intercept logistic coefficients.
const RIDGE_PENALTY: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stage1Kind {
    MultinomialLogistic,
    GaussianNaiveBayes,
}

/// A probability vector over the training groups. Entries are non-negative
/// and sum to 1 (within 1e-9), aligned to the classifier's class labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightVector(Vec<f64>);

impl WeightVector {
    /// Validate a raw vector: entries in [0, 1] (with 1e-9 slack) summing to
    /// 1 within 1e-9.
    pub fn new(values: Vec<f64>) -> Result<WeightVector> {
        if values.is_empty() {
            return Err(Error::EmptyData);
        }
        let total: f64 = values.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidParameter(format!(
                "weights must sum to 1, got {total}"
            )));
        }
        if values.iter().any(|&w| !(-1e-9..=1.0 + 1e-9).contains(&w)) {
            return Err(Error::InvalidParameter(
                "weights must lie in [0, 1]".into(),
            ));
        }
        Ok(WeightVector(values))
    }

    /// The uniform vector (1/J, ..., 1/J).
    pub fn uniform(len: usize) -> Result<WeightVector> {
        if len == 0 {
            return Err(Error::EmptyData);
        }
        Ok(WeightVector(vec![1.0 / len as f64; len]))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Arithmetic mean of several weight vectors; the mean of simplex points
    /// stays on the simplex.
    pub fn mean(vectors: &[WeightVector]) -> Result<WeightVector> {
        let first = vectors.first().ok_or(Error::EmptyData)?;
        let mut acc = vec![0.0; first.len()];
        for v in vectors {
            if v.len() != acc.len() {
                return Err(Error::DimensionMismatch {
                    expected: acc.len(),
                    actual: v.len(),
                });
            }
            for (a, w) in acc.iter_mut().zip(v.values()) {
                *a += w;
            }
        }
        let m = vectors.len() as f64;
        acc.iter_mut().for_each(|a| *a /= m);
        Ok(WeightVector(acc))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct LogisticModel {
    /// Training means/scales per original feature; prediction standardizes
    /// with these before applying the coefficients.
    feature_means: Vec<f64>,
    feature_scales: Vec<f64>,
    /// Original indices of the features kept (zero-variance features are
    /// dropped with a warning).
    kept_features: Vec<usize>,
    /// Row-major J x (kept + 1); entry 0 of each row is the intercept.
    coefficients: Vec<f64>,
    iterations: usize,
    converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct NaiveBayesModel {
    /// Per class: feature means and (floored) variances.
    class_means: Vec<Vec<f64>>,
    class_variances: Vec<Vec<f64>>,
    log_priors: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
enum ClassifierModel {
    Logistic(LogisticModel),
    NaiveBayes(NaiveBayesModel),
}

/// A fitted stage-1 classifier mapping a feature vector to a probability
/// vector over the training groups.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupClassifier {
    kind: Stage1Kind,
    class_labels: Vec<String>,
    n_features: usize,
    model: ClassifierModel,
    warnings: Vec<String>,
}

impl GroupClassifier {
    pub fn kind(&self) -> Stage1Kind {
        self.kind
    }

    pub fn class_labels(&self) -> &[String] {
        &self.class_labels
    }

    pub fn n_classes(&self) -> usize {
        self.class_labels.len()
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    /// Warnings recorded during fitting (e.g. dropped zero-variance features).
    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    /// Logistic fit diagnostics: (iterations, converged). None for naive Bayes.
    pub fn fit_diagnostics(&self) -> Option<(usize, bool)> {
        match &self.model {
            ClassifierModel::Logistic(m) => Some((m.iterations, m.converged)),
            ClassifierModel::NaiveBayes(_) => None,
        }
    }

    /// Add a constant to every class score (test hook for softmax
    /// shift-invariance). Only meaningful for the logistic model.
    pub fn shift_intercepts(&mut self, delta: f64) {
        if let ClassifierModel::Logistic(m) = &mut self.model {
            let width = m.kept_features.len() + 1;
            for j in 0..self.class_labels.len() {
                m.coefficients[j * width] += delta;
            }
        }
    }
}

/// Fit a stage-1 classifier on (X -> group). Requires at least two distinct
/// groups.
pub fn fit_classifier(data: &Dataset, kind: Stage1Kind) -> Result<GroupClassifier> {
    let class_labels = data.group_labels();
    if class_labels.len() < 2 {
        return Err(Error::SingleGroup);
    }
    let class_index: Vec<usize> = data
        .groups()
        .iter()
        .map(|g| class_labels.iter().position(|l| l == g).unwrap())
        .collect();

    let mut warnings = Vec::new();
    let model = match kind {
        Stage1Kind::MultinomialLogistic => ClassifierModel::Logistic(fit_logistic(
            data,
            &class_index,
            class_labels.len(),
            &mut warnings,
        )),
        Stage1Kind::GaussianNaiveBayes => {
            ClassifierModel::NaiveBayes(fit_naive_bayes(data, &class_index, class_labels.len()))
        }
    };
    Ok(GroupClassifier {
        kind,
        class_labels,
        n_features: data.n_features(),
        model,
        warnings,
    })
}

/// Predicted probability vector for one query point.
pub fn predict_weights(clf: &GroupClassifier, x: &[f64]) -> Result<WeightVector> {
    if x.len() != clf.n_features {
        return Err(Error::DimensionMismatch {
            expected: clf.n_features,
            actual: x.len(),
        });
    }
    if x.iter().any(|v| v.is_nan()) {
        return Err(Error::InvalidData("query point contains NaN".into()));
    }
    let scores = match &clf.model {
        ClassifierModel::Logistic(m) => logistic_scores(m, clf.n_classes(), x),
        ClassifierModel::NaiveBayes(m) => naive_bayes_log_posteriors(m, x),
    };
    Ok(WeightVector(softmax(&scores)))
}

/// Mean of the per-row weight vectors: the shared weights for an unseen
/// group with several observations.
pub fn group_averaged_weights<'a, I>(clf: &GroupClassifier, rows: I) -> Result<WeightVector>
where
    I: IntoIterator<Item = &'a [f64]>,
{
    let vectors: Vec<WeightVector> = rows
        .into_iter()
        .map(|row| predict_weights(clf, row))
        .collect::<Result<_>>()?;
    WeightVector::mean(&vectors)
}

fn softmax(scores: &[f64]) -> Vec<f64> {
    let max = scores.iter().fold(f64::NEG_INFINITY, |m, &s| m.max(s));
    let exps: Vec<f64> = scores.iter().map(|&s| (s - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

// ---------------------------------------------------------------------------
// multinomial logistic regression
// ---------------------------------------------------------------------------

/// Penalized objective and analytic gradient for multinomial logistic
/// regression with softmax scores.
///
/// `coefficients` is row-major `n_classes x (p + 1)` with the intercept in
/// column 0; `features` is row-major `n x p` (assumed already standardized
/// when called from the fitting path). The objective is the mean
/// cross-entropy plus `penalty / (2n)` times the squared norm of the
/// non-intercept coefficients; intercepts are never penalized.
pub fn penalized_loss_and_gradient(
    coefficients: &[f64],
    features: &[f64],
    class_index: &[usize],
    n_classes: usize,
    penalty: f64,
) -> (f64, Vec<f64>) {
    let n = class_index.len();
    let p = if n == 0 { 0 } else { features.len() / n };
    let width = p + 1;
    debug_assert_eq!(coefficients.len(), n_classes * width);

    let mut loss = 0.0;
    let mut grad = vec![0.0; coefficients.len()];
    let mut scores = vec![0.0; n_classes];
    for i in 0..n {
        let x = &features[i * p..(i + 1) * p];
        for (j, score) in scores.iter_mut().enumerate() {
            let row = &coefficients[j * width..(j + 1) * width];
            let mut s = row[0];
            for k in 0..p {
                s += row[k + 1] * x[k];
            }
            *score = s;
        }
        let max = scores.iter().fold(f64::NEG_INFINITY, |m, &s| m.max(s));
        let log_norm = max + scores.iter().map(|&s| (s - max).exp()).sum::<f64>().ln();
        loss -= scores[class_index[i]] - log_norm;
        for j in 0..n_classes {
            let prob = (scores[j] - log_norm).exp();
            let residual = prob - if class_index[i] == j { 1.0 } else { 0.0 };
            let row = &mut grad[j * width..(j + 1) * width];
            row[0] += residual;
            for k in 0..p {
                row[k + 1] += residual * x[k];
            }
        }
    }
    let n_f = n as f64;
    loss /= n_f;
    grad.iter_mut().for_each(|g| *g /= n_f);

    let mut penalty_term = 0.0;
    for j in 0..n_classes {
        for k in 1..width {
            let w = coefficients[j * width + k];
            penalty_term += w * w;
            grad[j * width + k] += penalty * w / n_f;
        }
    }
    loss += penalty * penalty_term / (2.0 * n_f);
    (loss, grad)
}

fn logistic_loss_only(
    coefficients: &[f64],
    features: &[f64],
    class_index: &[usize],
    n_classes: usize,
    penalty: f64,
) -> f64 {
    let n = class_index.len();
    let p = if n == 0 { 0 } else { features.len() / n };
    let width = p + 1;
    let mut loss = 0.0;
    let mut scores = vec![0.0; n_classes];
    for i in 0..n {
        let x = &features[i * p..(i + 1) * p];
        for (j, score) in scores.iter_mut().enumerate() {
            let row = &coefficients[j * width..(j + 1) * width];
            let mut s = row[0];
            for k in 0..p {
                s += row[k + 1] * x[k];
            }
            *score = s;
        }
        let max = scores.iter().fold(f64::NEG_INFINITY, |m, &s| m.max(s));
        let log_norm = max + scores.iter().map(|&s| (s - max).exp()).sum::<f64>().ln();
        loss -= scores[class_index[i]] - log_norm;
    }
    let n_f = n as f64;
    loss /= n_f;
    let mut penalty_term = 0.0;
    for j in 0..n_classes {
        for k in 1..width {
            let w = coefficients[j * width + k];
            penalty_term += w * w;
        }
    }
    loss + penalty * penalty_term / (2.0 * n_f)
}

fn fit_logistic(
    data: &Dataset,
    class_index: &[usize],
    n_classes: usize,
    warnings: &mut Vec<String>,
) -> LogisticModel {
    let n = data.n_rows();
    let p = data.n_features();

    // training standardization statistics (population formula)
    let mut means = vec![0.0; p];
    for row in data.rows() {
        for (m, v) in means.iter_mut().zip(row) {
            *m += v;
        }
    }
    means.iter_mut().for_each(|m| *m /= n as f64);
    let mut variances = vec![0.0; p];
    for row in data.rows() {
        for (k, v) in row.iter().enumerate() {
            let d = v - means[k];
            variances[k] += d * d;
        }
    }
    variances.iter_mut().for_each(|v| *v /= n as f64);

    let mut kept_features = Vec::new();
    let mut scales = vec![1.0; p];
    for k in 0..p {
        if variances[k] <= 1e-24 {
            warnings.push(format!(
                "feature '{}' has zero variance; dropped from the logistic model",
                data.feature_names()[k]
            ));
        } else {
            scales[k] = variances[k].sqrt();
            kept_features.push(k);
        }
    }

    let d = kept_features.len();
    let mut standardized = vec![0.0; n * d];
    for (i, row) in data.rows().enumerate() {
        for (slot, &k) in kept_features.iter().enumerate() {
            standardized[i * d + slot] = (row[k] - means[k]) / scales[k];
        }
    }

    let width = d + 1;
    let mut coefficients = vec![0.0; n_classes * width];
    let mut step = 1.0f64;
    let mut iterations = 0;
    let mut converged = false;
    let (mut loss, mut grad) = penalized_loss_and_gradient(
        &coefficients,
        &standardized,
        class_index,
        n_classes,
        RIDGE_PENALTY,
    );
    let mut trial = vec![0.0; coefficients.len()];
    for iter in 0..MAX_ITERATIONS {
        iterations = iter + 1;
        let grad_max = grad.iter().fold(0.0f64, |m, g| m.max(g.abs()));
        if grad_max < GRADIENT_TOLERANCE {
            converged = true;
            iterations = iter;
            break;
        }
        let grad_sq: f64 = grad.iter().map(|g| g * g).sum();
        // backtracking line search (Armijo), warm-starting from the last step
        step = (step * 2.0).min(1e6);
        let mut accepted = false;
        while step > 1e-20 {
            for (t, (w, g)) in trial.iter_mut().zip(coefficients.iter().zip(&grad)) {
                *t = w - step * g;
            }
            let trial_loss =
                logistic_loss_only(&trial, &standardized, class_index, n_classes, RIDGE_PENALTY);
            if trial_loss <= loss - 1e-4 * step * grad_sq {
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            break; // step size underflow: no further descent possible
        }
        std::mem::swap(&mut coefficients, &mut trial);
        let (new_loss, new_grad) = penalized_loss_and_gradient(
            &coefficients,
            &standardized,
            class_index,
            n_classes,
            RIDGE_PENALTY,
        );
        loss = new_loss;
        grad = new_grad;
    }

    LogisticModel {
        feature_means: means,
        feature_scales: scales,
        kept_features,
        coefficients,
        iterations,
        converged,
    }
}

fn logistic_scores(model: &LogisticModel, n_classes: usize, x: &[f64]) -> Vec<f64> {
    let d = model.kept_features.len();
    let width = d + 1;
    let standardized: Vec<f64> = model
        .kept_features
        .iter()
        .map(|&k| (x[k] - model.feature_means[k]) / model.feature_scales[k])
        .collect();
    (0..n_classes)
        .map(|j| {
            let row = &model.coefficients[j * width..(j + 1) * width];
            row[0]
                + row[1..]
                    .iter()
                    .zip(&standardized)
                    .map(|(w, v)| w * v)
                    .sum::<f64>()
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Gaussian naive Bayes
// ---------------------------------------------------------------------------

fn fit_naive_bayes(data: &Dataset, class_index: &[usize], n_classes: usize) -> NaiveBayesModel {
    let n = data.n_rows();
    let p = data.n_features();
    let mut counts = vec![0usize; n_classes];
    let mut class_means = vec![vec![0.0; p]; n_classes];
    for (i, row) in data.rows().enumerate() {
        let c = class_index[i];
        counts[c] += 1;
        for (m, v) in class_means[c].iter_mut().zip(row) {
            *m += v;
        }
    }
    for (c, mean) in class_means.iter_mut().enumerate() {
        mean.iter_mut().for_each(|m| *m /= counts[c] as f64);
    }
    let mut class_variances = vec![vec![0.0; p]; n_classes];
    for (i, row) in data.rows().enumerate() {
        let c = class_index[i];
        for (k, v) in row.iter().enumerate() {
            let d = v - class_means[c][k];
            class_variances[c][k] += d * d;
        }
    }
    for (c, var) in class_variances.iter_mut().enumerate() {
        var.iter_mut().for_each(|v| *v /= counts[c] as f64);
    }

    // variance floor: 1e-9 times the largest per-feature variance overall
    let mut overall_means = vec![0.0; p];
    for row in data.rows() {
        for (m, v) in overall_means.iter_mut().zip(row) {
            *m += v;
        }
    }
    overall_means.iter_mut().for_each(|m| *m /= n as f64);
    let mut overall_variances = vec![0.0; p];
    for row in data.rows() {
        for (k, v) in row.iter().enumerate() {
            let d = v - overall_means[k];
            overall_variances[k] += d * d;
        }
    }
    let max_variance = overall_variances
        .iter()
        .map(|s| s / n as f64)
        .fold(0.0f64, f64::max);
    let floor = (1e-9 * max_variance).max(f64::MIN_POSITIVE);
    for var in class_variances.iter_mut() {
        for v in var.iter_mut() {
            if *v < floor {
                *v = floor;
            }
        }
    }

    let log_priors = counts
        .iter()
        .map(|&c| (c as f64 / n as f64).ln())
        .collect();
    NaiveBayesModel {
        class_means,
        class_variances,
        log_priors,
    }
}

fn naive_bayes_log_posteriors(model: &NaiveBayesModel, x: &[f64]) -> Vec<f64> {
    model
        .log_priors
        .iter()
        .enumerate()
        .map(|(c, &log_prior)| {
            let mut log_like = 0.0;
            for (k, &v) in x.iter().enumerate() {
                let var = model.class_variances[c][k];
                let d = v - model.class_means[c][k];
                log_like += -0.5 * ((2.0 * std::f64::consts::PI * var).ln() + d * d / var);
            }
            log_prior + log_like
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dataset(xs: &[&[f64]], groups: &[&str]) -> Dataset {
        let p = xs[0].len();
        let features: Vec<f64> = xs.iter().flat_map(|r| r.iter().copied()).collect();
        let names = (0..p).map(|j| format!("x{j}")).collect();
        Dataset::new(
            features,
            vec![0.0; xs.len()],
            groups.iter().map(|g| g.to_string()).collect(),
            names,
        )
        .unwrap()
    }

    #[test]
    fn single_group_rejected() {
        let d = dataset(&[&[0.0], &[1.0]], &["a", "a"]);
        assert!(matches!(
            fit_classifier(&d, Stage1Kind::MultinomialLogistic),
            Err(Error::SingleGroup)
        ));
    }

    #[test]
    fn separable_groups_classified_confidently() {
        // group a: x0 < 0; group b: x0 > 1
        let mut xs: Vec<Vec<f64>> = Vec::new();
        let mut groups = Vec::new();
        for i in 0..20 {
            xs.push(vec![-0.5 + 0.02 * i as f64]);
            groups.push("a");
        }
        for i in 0..20 {
            xs.push(vec![1.1 + 0.02 * i as f64]);
            groups.push("b");
        }
        let rows: Vec<&[f64]> = xs.iter().map(|r| r.as_slice()).collect();
        let d = dataset(&rows, &groups);
        let clf = fit_classifier(&d, Stage1Kind::MultinomialLogistic).unwrap();
        for (i, row) in d.rows().enumerate() {
            let w = predict_weights(&clf, row).unwrap();
            let true_class = if i < 20 { 0 } else { 1 };
            assert!(
                w.values()[true_class] > 0.9,
                "row {i}: p(true class) = {}",
                w.values()[true_class]
            );
        }
    }

    #[test]
    fn naive_bayes_symmetric_midpoint() {
        // classes with sample mean 0 and 2, population variance 1, equal priors
        let d = dataset(&[&[-1.0], &[1.0], &[1.0], &[3.0]], &["a", "a", "b", "b"]);
        let clf = fit_classifier(&d, Stage1Kind::GaussianNaiveBayes).unwrap();
        let w = predict_weights(&clf, &[1.0]).unwrap();
        assert!((w.values()[0] - 0.5).abs() < 1e-12);
        assert!((w.values()[1] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn naive_bayes_closed_form_posterior() {
        // classes N(0,1) and N(2,1), equal priors, query 0.5:
        // log ratio = ((x-2)^2 - x^2)/2 = 1, so p(a) = e / (1 + e)
        let d = dataset(&[&[-1.0], &[1.0], &[1.0], &[3.0]], &["a", "a", "b", "b"]);
        let clf = fit_classifier(&d, Stage1Kind::GaussianNaiveBayes).unwrap();
        let w = predict_weights(&clf, &[0.5]).unwrap();
        let expected = std::f64::consts::E / (1.0 + std::f64::consts::E);
        assert!((w.values()[0] - expected).abs() < 1e-12);
    }

    #[test]
    fn weights_sum_to_one() {
        let d = dataset(
            &[&[0.0, 1.0], &[1.0, 0.0], &[5.0, 5.0], &[6.0, 4.0], &[-3.0, 2.0], &[-4.0, 3.0]],
            &["a", "a", "b", "b", "c", "c"],
        );
        for kind in [Stage1Kind::MultinomialLogistic, Stage1Kind::GaussianNaiveBayes] {
            let clf = fit_classifier(&d, kind).unwrap();
            for row in d.rows() {
                let w = predict_weights(&clf, row).unwrap();
                let total: f64 = w.values().iter().sum();
                assert!((total - 1.0).abs() <= 1e-9);
                assert!(w.values().iter().all(|&v| (0.0..=1.0).contains(&v)));
            }
        }
    }

    #[test]
    fn zero_variance_feature_dropped_with_warning() {
        let d = dataset(
            &[&[0.0, 7.0], &[1.0, 7.0], &[5.0, 7.0], &[6.0, 7.0]],
            &["a", "a", "b", "b"],
        );
        let clf = fit_classifier(&d, Stage1Kind::MultinomialLogistic).unwrap();
        assert_eq!(clf.warnings().len(), 1);
        assert!(clf.warnings()[0].contains("x1"));
        // prediction still accepts full-width queries
        let w = predict_weights(&clf, &[0.5, 7.0]).unwrap();
        assert_eq!(w.len(), 2);
    }

    #[test]
    fn group_average_of_single_row_is_predict_weights() {
        let d = dataset(&[&[0.0], &[1.0], &[5.0], &[6.0]], &["a", "a", "b", "b"]);
        let clf = fit_classifier(&d, Stage1Kind::GaussianNaiveBayes).unwrap();
        let x = [0.7];
        let single = predict_weights(&clf, &x).unwrap();
        let averaged = group_averaged_weights(&clf, [&x[..]]).unwrap();
        assert_eq!(single, averaged);
    }

    #[test]
    fn mean_of_opposite_corners_is_uniform() {
        let a = WeightVector(vec![1.0, 0.0]);
        let b = WeightVector(vec![0.0, 1.0]);
        let mean = WeightVector::mean(&[a, b]).unwrap();
        assert_eq!(mean.values(), &[0.5, 0.5]);
    }

    #[test]
    fn empty_group_average_rejected() {
        let d = dataset(&[&[0.0], &[1.0], &[5.0], &[6.0]], &["a", "a", "b", "b"]);
        let clf = fit_classifier(&d, Stage1Kind::GaussianNaiveBayes).unwrap();
        assert!(group_averaged_weights(&clf, std::iter::empty::<&[f64]>()).is_err());
    }
}
