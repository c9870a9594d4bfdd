//! The small set of linear-algebra kernels the samplers need.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Tolerance under which an almost-symmetric matrix is symmetrized instead of
/// rejected. Absorbs floating-point noise from sampler round-trips.
pub const SYMMETRY_TOLERANCE: f64 = 1e-10;

/// Largest absolute entry of `A - A'`.
pub fn max_asymmetry(a: &DMatrix<f64>) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..a.nrows() {
        for j in (i + 1)..a.ncols() {
            worst = worst.max((a[(i, j)] - a[(j, i)]).abs());
        }
    }
    worst
}

/// Return `(A + A') / 2` if the asymmetry is within [`SYMMETRY_TOLERANCE`],
/// otherwise reject.
pub fn symmetrize(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if !a.is_square() {
        return Err(Error::InvalidParameter(format!(
            "expected a square matrix, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    let asym = max_asymmetry(a);
    if asym > SYMMETRY_TOLERANCE {
        return Err(Error::NotSymmetric {
            max_asymmetry: asym,
            tolerance: SYMMETRY_TOLERANCE,
        });
    }
    Ok((a + a.transpose()) * 0.5)
}

/// Lower-triangular Cholesky factor `L` with `L L' = A`.
///
/// Fails with the 1-based pivot index when `A` is not positive definite.
/// The input is assumed symmetric; only the lower triangle is read.
pub fn cholesky(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if !a.is_square() {
        return Err(Error::InvalidParameter(format!(
            "cholesky requires a square matrix, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    let n = a.nrows();
    let mut l = DMatrix::<f64>::zeros(n, n);
    for j in 0..n {
        let mut diag = a[(j, j)];
        for k in 0..j {
            diag -= l[(j, k)] * l[(j, k)];
        }
        if diag <= 0.0 || !diag.is_finite() {
            return Err(Error::NotPositiveDefinite { pivot: j + 1 });
        }
        let root = diag.sqrt();
        l[(j, j)] = root;
        for i in (j + 1)..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / root;
        }
    }
    Ok(l)
}

/// Inverse of a symmetric positive-definite matrix via its Cholesky factor.
pub fn spd_inverse(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let l = cholesky(a)?;
    let n = a.nrows();
    let l_inv = l
        .solve_lower_triangular(&DMatrix::<f64>::identity(n, n))
        .ok_or(Error::NotPositiveDefinite { pivot: 1 })?;
    Ok(l_inv.transpose() * l_inv)
}
