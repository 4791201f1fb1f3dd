//! Special functions and dense linear algebra shared by the other modules.

pub mod bessel;
pub mod dense;
pub mod skew_normal;
pub mod special;

pub use bessel::{bessel_k, bessel_k_scaled, BesselK};
pub use dense::{cholesky, log_det, solve_triangular, CholeskyFactor, DenseMatrix};
pub use skew_normal::{
    skew_normal_cdf, skew_normal_fit, skew_normal_fit_fixed_shape, skew_normal_quantile, SkewNormalParams,
};
pub use special::{normal_cdf, normal_quantile, normal_sf, owens_t};
