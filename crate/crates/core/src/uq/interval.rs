use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{skew_normal_fit, skew_normal_fit_fixed_shape, SkewNormalParams};

pub const MIN_INTERVAL_SAMPLES: usize = 50;

/// Interval from a skew-normal fit, with the raw empirical quantiles kept
/// for comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnInterval {
    pub lower: f64,
    pub upper: f64,
    /// `None` when the fit failed and the empirical quantiles were used.
    pub fit: Option<SkewNormalParams>,
    pub empirical: (f64, f64),
    pub fallback: bool,
}

/// Linear-interpolation sample quantile (the "type 7" definition).
pub fn empirical_quantile(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Skew-normal quantiles at `α/2` and `1 − α/2`.
pub fn sn_interval(samples: &[f64], alpha: f64) -> Result<SnInterval> {
    sn_interval_with_shape(samples, alpha, None)
}

/// As [`sn_interval`], optionally holding the shape fixed.
pub fn sn_interval_with_shape(samples: &[f64], alpha: f64, shape: Option<f64>) -> Result<SnInterval> {
    if samples.len() < MIN_INTERVAL_SAMPLES {
        return Err(Error::InvalidArgument(format!(
            "need at least {MIN_INTERVAL_SAMPLES} samples, got {}",
            samples.len()
        )));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidArgument(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    if samples.iter().any(|v| !v.is_finite()) {
        return Err(Error::DegenerateSample("non-finite sample".into()));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let empirical = (empirical_quantile(&sorted, alpha / 2.0), empirical_quantile(&sorted, 1.0 - alpha / 2.0));
    let fitted = match shape {
        Some(a) => skew_normal_fit_fixed_shape(samples, a),
        None => skew_normal_fit(samples),
    };
    let fit = match fitted {
        Ok(p) => p,
        // Zero spread is a property of the input, not a fitting problem.
        Err(e) if sorted[0] == sorted[sorted.len() - 1] => return Err(e),
        Err(_) => {
            return Ok(SnInterval { lower: empirical.0, upper: empirical.1, fit: None, empirical, fallback: true })
        }
    };
    let (lower, upper) = match (fit.quantile(alpha / 2.0), fit.quantile(1.0 - alpha / 2.0)) {
        (Ok(l), Ok(u)) if l < u => (l, u),
        _ => return Ok(SnInterval { lower: empirical.0, upper: empirical.1, fit: Some(fit), empirical, fallback: true }),
    };
    Ok(SnInterval { lower, upper, fit: Some(fit), empirical, fallback: false })
}
