//! Deterministic random sampling and the linear-algebra kernels backing the
//! simulation settings.

pub mod linalg;
pub mod rng;
pub mod sampling;

pub use linalg::{cholesky, max_asymmetry, spd_inverse, symmetrize, SYMMETRY_TOLERANCE};
pub use rng::RandomSource;
pub use sampling::{sample_inverse_wishart, sample_matrix_normal, sample_wishart, MatrixNormalParams};
