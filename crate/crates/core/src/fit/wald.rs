use serde::{Deserialize, Serialize};

use super::FitResult;
use crate::model::{MeanSpec, PARAM_NAMES};

/// One line of a Wald table. `std_error`, `z` and `p_value` are `None` when
/// the information matrix could not be inverted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaldRow {
    pub name: String,
    pub estimate: f64,
    pub std_error: Option<f64>,
    pub z: Option<f64>,
    pub p_value: Option<f64>,
}

/// Z against zero with a two-sided normal p-value.
pub fn wald_row(name: &str, estimate: f64, std_error: Option<f64>) -> WaldRow {
    let z = std_error.filter(|se| *se > 0.0).map(|se| estimate / se);
    let z = match (z, std_error) {
        (None, Some(se)) if se == 0.0 && estimate == 0.0 => Some(0.0),
        _ => z,
    };
    let p_value = z.map(|z| libm::erfc(z.abs() / std::f64::consts::SQRT_2));
    WaldRow { name: name.to_string(), estimate, std_error, z, p_value }
}

fn coef_names(mean: MeanSpec) -> &'static [&'static str] {
    match mean {
        MeanSpec::Zero => &[],
        MeanSpec::Constant => &["intercept"],
        MeanSpec::Linear => &["intercept", "x", "y"],
    }
}

/// Mean coefficients first, then the covariance parameters on their natural
/// scale.
pub fn wald_summary(fit: &FitResult) -> Vec<WaldRow> {
    let mut rows: Vec<WaldRow> = coef_names(fit.mean)
        .iter()
        .zip(fit.beta_hat.iter().zip(&fit.beta_std_errors))
        .map(|(name, (b, se))| wald_row(name, *b, Some(*se)))
        .collect();
    let est = fit.params.to_array();
    for k in 0..4 {
        rows.push(wald_row(PARAM_NAMES[k], est[k], fit.std_errors[k]));
    }
    rows
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reported_trend_rows() {
        let r = wald_row("intercept", -0.6079, Some(0.2086));
        assert!((r.z.unwrap() + 2.9142).abs() < 5e-4, "{r:?}");
        assert!((r.p_value.unwrap() - 0.0036).abs() < 5e-5, "{r:?}");
        let r = wald_row("intercept", -1.4541, Some(0.157));
        assert!((r.z.unwrap() + 9.2621).abs() < 5e-4, "{r:?}");
        assert!(r.p_value.unwrap() < 1e-15);
    }

    #[test]
    fn zero_estimate() {
        let r = wald_row("b", 0.0, Some(0.3));
        assert_eq!(r.z, Some(0.0));
        assert_eq!(r.p_value, Some(1.0));
    }

    #[test]
    fn p_value_matches_normal_tail() {
        for z in [0.1, 0.5, 1.0, 1.96, 3.0, 5.0] {
            let r = wald_row("b", z, Some(1.0));
            let oracle = 2.0 * crate::numerics::normal_sf(z);
            assert!((r.p_value.unwrap() - oracle).abs() < 1e-12 * oracle.max(1e-300) + 1e-15, "z={z}");
        }
    }

    #[test]
    fn missing_error_propagates() {
        let r = wald_row("nugget", 0.2, None);
        assert!(r.std_error.is_none() && r.z.is_none() && r.p_value.is_none());
    }
}
