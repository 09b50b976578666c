//! Sparse deconvolution toolkit.
//!
//! Recovers sparse event trains from smoothed, noisy observations `y = H s + e`
//! where `H` is the causal convolution operator of a hemodynamic response.
//! Provides LASSO and Dantzig-selector regularization paths, information
//! criterion selection, and the mixture-components inference (MCI) classifier
//! which turns a whole path into per-sample activation probabilities.

pub mod error;
pub mod evaluation;
pub mod homotopy;
pub mod io;
pub mod mci;
pub mod selection;
pub mod signal;

pub use error::{Error, Result};
