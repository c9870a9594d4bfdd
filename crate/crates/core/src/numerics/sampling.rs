//! Matrix-normal and Wishart-family samplers.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::numerics::linalg::{cholesky, spd_inverse, symmetrize};
use crate::numerics::rng::RandomSource;

/// Parameters of a matrix normal distribution MN(M, U, V): location `M`
/// (rows x cols), row covariance `U` (rows x rows), column covariance `V`
/// (cols x cols). `U` and `V` must be symmetric positive-definite.
#[derive(Debug, Clone)]
pub struct MatrixNormalParams {
    location: DMatrix<f64>,
    row_cov_factor: DMatrix<f64>,
    col_cov_factor: DMatrix<f64>,
}

impl MatrixNormalParams {
    /// Validates symmetry (within 1e-10, symmetrizing) and positive
    /// definiteness of both covariances, and caches their Cholesky factors.
    pub fn new(location: DMatrix<f64>, row_cov: DMatrix<f64>, col_cov: DMatrix<f64>) -> Result<Self> {
        if row_cov.nrows() != location.nrows() {
            return Err(Error::DimensionMismatch {
                expected: location.nrows(),
                actual: row_cov.nrows(),
            });
        }
        if col_cov.nrows() != location.ncols() {
            return Err(Error::DimensionMismatch {
                expected: location.ncols(),
                actual: col_cov.nrows(),
            });
        }
        let row_cov = symmetrize(&row_cov)?;
        let col_cov = symmetrize(&col_cov)?;
        Ok(Self {
            location,
            row_cov_factor: cholesky(&row_cov)?,
            col_cov_factor: cholesky(&col_cov)?,
        })
    }

    pub fn rows(&self) -> usize {
        self.location.nrows()
    }

    pub fn cols(&self) -> usize {
        self.location.ncols()
    }
}

/// One draw from MN(M, U, V), computed as `M + A Z B'` with `A A' = U`,
/// `B B' = V` and `Z` filled row-major with iid standard normals.
pub fn sample_matrix_normal(params: &MatrixNormalParams, rng: &mut RandomSource) -> DMatrix<f64> {
    let (r, c) = (params.rows(), params.cols());
    let mut z = DMatrix::<f64>::zeros(r, c);
    for i in 0..r {
        for j in 0..c {
            z[(i, j)] = rng.standard_normal();
        }
    }
    &params.location + &params.row_cov_factor * z * params.col_cov_factor.transpose()
}

/// One draw from the Wishart distribution W(scale, dof) via the Bartlett
/// decomposition: `W = L A A' L'` where `L L' = scale` and `A` is lower
/// triangular with `A_ii = sqrt(chi2(dof - i + 1))` (1-based `i`) and
/// standard-normal entries below the diagonal.
pub fn sample_wishart(scale: &DMatrix<f64>, dof: f64, rng: &mut RandomSource) -> Result<DMatrix<f64>> {
    let k = scale.nrows();
    if dof <= k as f64 - 1.0 {
        return Err(Error::InvalidParameter(format!(
            "Wishart dof must exceed K - 1 = {}, got {dof}",
            k - 1
        )));
    }
    let l = cholesky(&symmetrize(scale)?)?;
    let mut bartlett = DMatrix::<f64>::zeros(k, k);
    for i in 0..k {
        bartlett[(i, i)] = rng.chi_squared(dof - i as f64)?.sqrt();
        for j in 0..i {
            bartlett[(i, j)] = rng.standard_normal();
        }
    }
    let la = &l * bartlett;
    Ok(&la * la.transpose())
}

/// One draw from the inverse-Wishart distribution IW(scale, dof): the inverse
/// of a Wishart(scale^-1, dof) draw. The result is exactly symmetric and
/// positive definite.
pub fn sample_inverse_wishart(
    scale: &DMatrix<f64>,
    dof: f64,
    rng: &mut RandomSource,
) -> Result<DMatrix<f64>> {
    let k = scale.nrows();
    if dof <= k as f64 - 1.0 {
        return Err(Error::InvalidParameter(format!(
            "inverse-Wishart dof must exceed K - 1 = {}, got {dof}",
            k - 1
        )));
    }
    let inv_scale = spd_inverse(&symmetrize(scale)?)?;
    let w = sample_wishart(&inv_scale, dof, rng)?;
    let inv = spd_inverse(&w)?;
    // exact symmetry; spd_inverse only drifts at the last ulp
    Ok((&inv + inv.transpose()) * 0.5)
}
