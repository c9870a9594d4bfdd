//! Synthetic clustered-data generator for the three simulation settings.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::numerics::{sample_inverse_wishart, MatrixNormalParams, RandomSource};

/// Which simulation setting to draw from.
///
/// Setting 1: nonlinear fixed effects plus independent linear random effects
/// (group covariance `U = I`). Setting 2: the same model with a shared
/// `U ~ IW(I, K+1)` so features and random effects have a common group
/// covariance. Setting 3: each group's mean is governed by a subset of four
/// basis functions chosen by the group index, with five extra noise features.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum Setting {
    One,
    Two,
    Three,
}

impl TryFrom<u8> for Setting {
    type Error = String;

    fn try_from(v: u8) -> std::result::Result<Self, String> {
        match v {
            1 => Ok(Setting::One),
            2 => Ok(Setting::Two),
            3 => Ok(Setting::Three),
            other => Err(format!("setting must be 1, 2, or 3, got {other}")),
        }
    }
}

impl From<Setting> for u8 {
    fn from(s: Setting) -> u8 {
        match s {
            Setting::One => 1,
            Setting::Two => 2,
            Setting::Three => 3,
        }
    }
}

impl std::fmt::Display for Setting {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", u8::from(*self))
    }
}

/// Data-generating process for setting 3.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dgp {
    Mu1,
    Mu2,
    Mu3,
}

impl std::fmt::Display for Dgp {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Dgp::Mu1 => write!(f, "mu1"),
            Dgp::Mu2 => write!(f, "mu2"),
            Dgp::Mu3 => write!(f, "mu3"),
        }
    }
}

impl std::str::FromStr for Dgp {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "mu1" => Ok(Dgp::Mu1),
            "mu2" => Ok(Dgp::Mu2),
            "mu3" => Ok(Dgp::Mu3),
            other => Err(format!("dgp must be one of mu1, mu2, mu3; got '{other}'")),
        }
    }
}

/// Full specification of one simulated-data draw.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub setting: Setting,
    /// Required for setting 3, rejected otherwise.
    pub dgp: Option<Dgp>,
    /// Observations per group.
    pub n: usize,
    /// Total number of groups (train + test).
    pub k: usize,
    /// Random-effects scale; settings 1 and 2 only (ignored for setting 3).
    pub sigma_alpha: f64,
    pub seed: u64,
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n < 1 {
            return Err(Error::InvalidParameter("n must be at least 1".into()));
        }
        if self.k < 2 {
            return Err(Error::InvalidParameter("K must be at least 2".into()));
        }
        if self.k - train_group_count(self.k) < 1 {
            return Err(Error::InvalidParameter(format!(
                "K = {} leaves no test groups after the 80/20 split; use K >= 5",
                self.k
            )));
        }
        if !self.sigma_alpha.is_finite() || self.sigma_alpha < 0.0 {
            return Err(Error::InvalidParameter(
                "sigma_alpha must be a finite non-negative number".into(),
            ));
        }
        match (self.setting, self.dgp) {
            (Setting::Three, None) => Err(Error::InvalidParameter(
                "setting 3 requires a dgp (mu1, mu2, or mu3)".into(),
            )),
            (Setting::One | Setting::Two, Some(_)) => Err(Error::InvalidParameter(
                "dgp applies to setting 3 only".into(),
            )),
            _ => Ok(()),
        }
    }

    /// Feature count: 5 for settings 1–2, 10 for setting 3 (5 informative +
    /// 5 noise).
    pub fn n_features(&self) -> usize {
        match self.setting {
            Setting::One | Setting::Two => 5,
            Setting::Three => 10,
        }
    }
}

/// Number of training groups under the 80/20 split: `ceil(0.8 K)`.
pub fn train_group_count(k: usize) -> usize {
    (4 * k).div_ceil(5)
}

/// A generated train/test pair with the noiseless means retained.
#[derive(Debug, Clone)]
pub struct SimDataset {
    pub config: SimConfig,
    pub train: Dataset,
    pub test: Dataset,
    /// Noiseless mean per train row, aligned with `train`.
    pub true_mu_train: Vec<f64>,
    /// Noiseless mean per test row, aligned with `test`.
    pub true_mu_test: Vec<f64>,
    /// Per-group random effects (intercept then one slope per feature),
    /// indexed by group id; settings 1–2 only.
    pub random_effects: Option<Vec<Vec<f64>>>,
}

/// Friedman's five-dimensional test function:
/// `sin(pi x1 x2) + 2 (x3 - 0.5)^2 + x4 + 0.5 x5`. Entries beyond the first
/// five are ignored.
pub fn friedman(x: &[f64]) -> Result<f64> {
    if x.len() < 5 {
        return Err(Error::DimensionMismatch {
            expected: 5,
            actual: x.len(),
        });
    }
    Ok((std::f64::consts::PI * x[0] * x[1]).sin() + 2.0 * (x[2] - 0.5).powi(2) + x[3] + 0.5 * x[4])
}

/// The four setting-3 basis functions `(f0, f1, f2, f3)`; only the first
/// three entries of `x` are read.
pub fn basis_functions(x: &[f64]) -> Result<(f64, f64, f64, f64)> {
    if x.len() < 3 {
        return Err(Error::DimensionMismatch {
            expected: 3,
            actual: x.len(),
        });
    }
    let pi = std::f64::consts::PI;
    let (x1, x2, x3) = (x[0], x[1], x[2]);
    let ind = if x2 > 0.5 { 1.0 } else { 0.0 };
    let f0 = 10.0 * (pi * x1 * x2).sin();
    let f1 = 10.0 * (x3 - 0.5).powi(2);
    let f2 = 10.0 * (x1 - 0.5).powi(2) + 10.0 * x2 + 5.0 * x3;
    let f3 = 6.0 * x1 + (4.0 - 10.0 * ind) * (pi * x1).sin() - 4.0 * ind + 15.0;
    Ok((f0, f1, f2, f3))
}

/// Setting-3 group mean for 0-based group index `k`.
fn setting3_mu(dgp: Dgp, x: &[f64], k: usize) -> Result<f64> {
    let (f0, f1, f2, f3) = basis_functions(x)?;
    let even = k % 2 == 0;
    Ok(match dgp {
        Dgp::Mu1 => {
            if even {
                f0 + f1 + f2 - 0.75
            } else {
                f3
            }
        }
        Dgp::Mu2 => {
            (if k % 3 == 0 { f0 } else { 0.0 })
                + (if k % 3 == 1 { f1 } else { 0.0 })
                + (if k % 3 == 2 { f2 } else { 0.0 })
                + (if even { f3 } else { 0.0 })
        }
        Dgp::Mu3 => {
            (if k % 3 != 2 { f0 } else { 0.0 })
                + (if k % 3 != 0 { f1 } else { 0.0 })
                + (if k % 3 != 1 { f2 } else { 0.0 })
                + (if even { f3 } else { 0.0 })
        }
    })
}

/// Generate one simulated dataset.
///
/// Sampling order is fixed: the location matrix `M`, then `U` (setting 2),
/// then the `n` feature draws, then the random effects (settings 1–2), then
/// the outcome noise row by row, and finally the group permutation for the
/// 80/20 split. Observation `i` of group `k` is row `k` of the `i`th
/// matrix-normal draw. The random effects are drawn as `sigma_alpha * A Z`
/// with `A A' = U`, which stays defined at `sigma_alpha = 0`.
pub fn generate(config: &SimConfig) -> Result<SimDataset> {
    config.validate()?;
    let mut rng = RandomSource::new(config.seed);
    let k = config.k;
    let n = config.n;
    let p = config.n_features();

    // location matrix, row-major draw order
    let (lo, hi) = match config.setting {
        Setting::One | Setting::Two => (-1.0, 1.0),
        Setting::Three => (0.0, 2.0),
    };
    let mut location = DMatrix::<f64>::zeros(k, p);
    for i in 0..k {
        for j in 0..p {
            location[(i, j)] = rng.uniform(lo, hi);
        }
    }

    // group covariance
    let group_cov = match config.setting {
        Setting::One | Setting::Three => DMatrix::<f64>::identity(k, k),
        Setting::Two => sample_inverse_wishart(&DMatrix::<f64>::identity(k, k), k as f64 + 1.0, &mut rng)?,
    };
    let feature_cov = DMatrix::<f64>::identity(p, p);
    let x_params = MatrixNormalParams::new(location, group_cov.clone(), feature_cov)?;

    // n draws; draw i supplies observation i of every group
    let draws: Vec<DMatrix<f64>> = (0..n)
        .map(|_| crate::numerics::sample_matrix_normal(&x_params, &mut rng))
        .collect();

    // random effects: one K x (p+1) matrix-normal draw with row covariance U
    // and column covariance sigma_alpha^2 I
    let random_effects: Option<Vec<Vec<f64>>> = match config.setting {
        Setting::One | Setting::Two => {
            let zero = DMatrix::<f64>::zeros(k, p + 1);
            let alpha_params =
                MatrixNormalParams::new(zero, group_cov, DMatrix::<f64>::identity(p + 1, p + 1))?;
            let unit_draw = crate::numerics::sample_matrix_normal(&alpha_params, &mut rng);
            let scaled = unit_draw * config.sigma_alpha;
            Some((0..k).map(|g| scaled.row(g).iter().copied().collect()).collect())
        }
        Setting::Three => None,
    };

    // assemble rows group-major, drawing outcome noise in the same order
    let mut features = Vec::with_capacity(k * n * p);
    let mut outcomes = Vec::with_capacity(k * n);
    let mut true_mu = Vec::with_capacity(k * n);
    let mut groups = Vec::with_capacity(k * n);
    for g in 0..k {
        for draw in &draws {
            let x: Vec<f64> = draw.row(g).iter().copied().collect();
            let mu = match config.setting {
                Setting::One | Setting::Two => {
                    let alpha = &random_effects.as_ref().unwrap()[g];
                    let mut value = friedman(&x)?;
                    value += alpha[0];
                    for (j, xj) in x.iter().enumerate() {
                        value += alpha[j + 1] * xj;
                    }
                    value
                }
                Setting::Three => setting3_mu(config.dgp.unwrap(), &x, g)?,
            };
            let y = mu + rng.standard_normal();
            features.extend_from_slice(&x);
            outcomes.push(y);
            true_mu.push(mu);
            groups.push(g.to_string());
        }
    }

    // 80/20 split over a seeded permutation of the group indices
    let mut order: Vec<usize> = (0..k).collect();
    rng.shuffle(&mut order);
    let n_train_groups = train_group_count(k);
    let mut train_groups: Vec<usize> = order[..n_train_groups].to_vec();
    let mut test_groups: Vec<usize> = order[n_train_groups..].to_vec();
    train_groups.sort_unstable();
    test_groups.sort_unstable();

    let feature_names: Vec<String> = (1..=p).map(|j| format!("x{j}")).collect();
    let build = |group_ids: &[usize]| -> Result<(Dataset, Vec<f64>)> {
        let mut f = Vec::new();
        let mut y = Vec::new();
        let mut mu = Vec::new();
        let mut g = Vec::new();
        for &gid in group_ids {
            for i in 0..n {
                let row = gid * n + i;
                f.extend_from_slice(&features[row * p..(row + 1) * p]);
                y.push(outcomes[row]);
                mu.push(true_mu[row]);
                g.push(groups[row].clone());
            }
        }
        Ok((Dataset::new(f, y, g, feature_names.clone())?, mu))
    };
    let (train, true_mu_train) = build(&train_groups)?;
    let (test, true_mu_test) = build(&test_groups)?;

    Ok(SimDataset {
        config: config.clone(),
        train,
        test,
        true_mu_train,
        true_mu_test,
        random_effects,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn friedman_plug_ins() {
        assert_eq!(friedman(&[0.0, 0.5, 0.5, 0.0, 0.0]).unwrap(), 0.0);
        let v = friedman(&[0.5, 1.0, 0.5, 1.0, 1.0]).unwrap();
        assert!((v - 2.5).abs() < 1e-15);
        let w = friedman(&[1.0, 1.0, 0.0, 0.0, 0.0]).unwrap();
        assert!((w - 0.5).abs() < 1e-15);
    }

    #[test]
    fn friedman_requires_five_entries() {
        assert!(friedman(&[0.0; 4]).is_err());
        assert!(friedman(&[0.0; 6]).is_ok());
    }

    #[test]
    fn basis_function_plug_ins() {
        // x = (0, 0, 0.5): f2 = 10(0 - 0.5)^2 + 10*0 + 5*0.5 = 5
        let (f0, f1, f2, f3) = basis_functions(&[0.0, 0.0, 0.5]).unwrap();
        assert_eq!(f0, 0.0);
        assert_eq!(f1, 0.0);
        assert!((f2 - 5.0).abs() < 1e-15);
        assert!((f3 - 15.0).abs() < 1e-15);

        // indicator active: x = (0.5, 1, 0)
        let (_, _, _, f3) = basis_functions(&[0.5, 1.0, 0.0]).unwrap();
        assert!((f3 - 8.0).abs() < 1e-15, "f3 = {f3}");

        // x = (1, 0, 0): f2 = 2.5, f3 = 6 + 4 sin(pi) + 15 = 21
        let (_, _, f2, f3) = basis_functions(&[1.0, 0.0, 0.0]).unwrap();
        assert!((f2 - 2.5).abs() < 1e-15);
        assert!((f3 - 21.0).abs() < 1e-12);
    }

    #[test]
    fn split_counts_match_80_20() {
        let config = SimConfig {
            setting: Setting::One,
            dgp: None,
            n: 10,
            k: 40,
            sigma_alpha: 1.0,
            seed: 7,
        };
        let sim = generate(&config).unwrap();
        assert_eq!(sim.train.n_rows(), 320);
        assert_eq!(sim.test.n_rows(), 80);
        assert_eq!(sim.train.group_labels().len(), 32);
        assert_eq!(sim.test.group_labels().len(), 8);
    }

    #[test]
    fn train_and_test_groups_disjoint() {
        let config = SimConfig {
            setting: Setting::One,
            dgp: None,
            n: 5,
            k: 15,
            sigma_alpha: 2.0,
            seed: 3,
        };
        let sim = generate(&config).unwrap();
        let train_groups = sim.train.group_labels();
        for g in sim.test.group_labels() {
            assert!(!train_groups.contains(&g));
        }
    }

    #[test]
    fn deterministic_given_seed() {
        let config = SimConfig {
            setting: Setting::Two,
            dgp: None,
            n: 4,
            k: 10,
            sigma_alpha: 1.5,
            seed: 11,
        };
        let a = generate(&config).unwrap();
        let b = generate(&config).unwrap();
        assert_eq!(a.train, b.train);
        assert_eq!(a.test, b.test);
        assert_eq!(a.true_mu_test, b.true_mu_test);
    }

    #[test]
    fn sigma_zero_leaves_pure_friedman_plus_noise() {
        let config = SimConfig {
            setting: Setting::One,
            dgp: None,
            n: 500,
            k: 20,
            sigma_alpha: 0.0,
            seed: 5,
        };
        let sim = generate(&config).unwrap();
        let mut residuals = Vec::new();
        for (ds, mus) in [(&sim.train, &sim.true_mu_train), (&sim.test, &sim.true_mu_test)] {
            for (i, row) in ds.rows().enumerate() {
                // with sigma_alpha = 0, mu is exactly friedman(x)
                assert!((mus[i] - friedman(row).unwrap()).abs() < 1e-12);
                residuals.push(ds.outcomes()[i] - mus[i]);
            }
        }
        assert_eq!(residuals.len(), 10_000);
        let mean: f64 = residuals.iter().sum::<f64>() / residuals.len() as f64;
        let var: f64 =
            residuals.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>() / residuals.len() as f64;
        assert!(mean.abs() < 0.05, "residual mean {mean}");
        assert!((var - 1.0).abs() < 0.05, "residual variance {var}");
    }

    #[test]
    fn setting3_mu1_even_group_matches_basis_sum() {
        let config = SimConfig {
            setting: Setting::Three,
            dgp: Some(Dgp::Mu1),
            n: 3,
            k: 10,
            sigma_alpha: 0.0,
            seed: 9,
        };
        let sim = generate(&config).unwrap();
        for (ds, mus) in [(&sim.train, &sim.true_mu_train), (&sim.test, &sim.true_mu_test)] {
            for (i, row) in ds.rows().enumerate() {
                let k: usize = ds.groups()[i].parse().unwrap();
                let (f0, f1, f2, f3) = basis_functions(row).unwrap();
                let expected = if k % 2 == 0 { f0 + f1 + f2 - 0.75 } else { f3 };
                assert_eq!(mus[i], expected);
            }
        }
    }

    #[test]
    fn setting3_requires_dgp() {
        let config = SimConfig {
            setting: Setting::Three,
            dgp: None,
            n: 2,
            k: 10,
            sigma_alpha: 0.0,
            seed: 0,
        };
        assert!(generate(&config).is_err());
    }

    #[test]
    fn small_k_without_test_groups_rejected() {
        let config = SimConfig {
            setting: Setting::One,
            dgp: None,
            n: 2,
            k: 4,
            sigma_alpha: 0.0,
            seed: 0,
        };
        assert!(generate(&config).is_err());
    }
}
