//! Weighted orthogonal components regression.
//!
//! A design matrix is reduced to its principal components, each component's
//! contribution to the fit is scaled by a weight in `[0, 1]`, and the few
//! parameters of the weight function are chosen by minimizing GCV, AIC or BIC
//! directly. Ridge regression and principal components regression are both
//! special cases; ordering the components by their squared response
//! coefficients instead of their singular values gives the `gamma` variants.

pub mod bench;
pub mod components;
pub mod criteria;
pub mod error;
pub mod models;
pub mod tuner;
pub mod weights;

pub use components::{extract_components, standardize, OrthoBasis, Standardizer};
pub use criteria::Criterion;
pub use error::{Result, WocrError};
pub use models::{fit, predict, FitResult, ModelSpec, Variant};
pub use weights::{ComponentOrdering, TuningParams, WeightFamily, WeightSpec};
