//! Matérn covariance model, parameter transforms and datasets.

pub mod data;
pub mod kernel;
pub mod params;

pub use data::{design_matrix, Dataset, MeanSpec};
pub use kernel::{cov_matrix, matern_cov, MaternKernel, TABULATE_ABOVE};
pub use params::{LogParams, MaternParams, NUGGET_FLOOR, PARAM_NAMES, SMOOTHNESS_MAX, SMOOTHNESS_MIN};
