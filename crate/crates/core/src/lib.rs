//! Weighted sum-of-trees regression for clustered data.
//!
//! Fits one CART tree (or random forest) per training group and combines
//! their predictions with similarity weights from a first-stage group
//! classifier, so that observations from groups never seen in training are
//! predicted by the training groups they most resemble. Includes the
//! simulation engine, benchmark harness, and variable-importance tooling
//! used to evaluate the method.

pub mod bench;
pub mod data;
pub mod ensemble;
pub mod error;
pub mod forest;
pub mod importance;
pub mod model_io;
pub mod numerics;
pub mod simgen;
pub mod stage1;
pub mod tree;

pub use data::Dataset;
pub use error::{Error, Result};
