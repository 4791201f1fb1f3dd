use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const SMOOTHNESS_MIN: f64 = 0.05;
pub const SMOOTHNESS_MAX: f64 = 5.0;
/// Nugget floor used when mapping to log coordinates.
pub const NUGGET_FLOOR: f64 = 1e-12;
const LOGIT_EPS: f64 = 1e-12;

/// Matérn covariance parameters: partial sill σ², range φ, smoothness ν
/// and nugget τ².
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaternParams {
    pub sigma_sq: f64,
    pub range: f64,
    pub smoothness: f64,
    pub nugget: f64,
}

impl MaternParams {
    pub fn new(sigma_sq: f64, range: f64, smoothness: f64, nugget: f64) -> Result<Self> {
        let p = Self { sigma_sq, range, smoothness, nugget };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let all_finite = [self.sigma_sq, self.range, self.smoothness, self.nugget].iter().all(|v| v.is_finite());
        if !all_finite
            || self.sigma_sq <= 0.0
            || self.range <= 0.0
            || self.nugget < 0.0
            || !(SMOOTHNESS_MIN..=SMOOTHNESS_MAX).contains(&self.smoothness)
        {
            return Err(Error::InvalidParams(format!(
                "need σ² > 0, φ > 0, ν ∈ [{SMOOTHNESS_MIN}, {SMOOTHNESS_MAX}], τ² ≥ 0; got {self:?}"
            )));
        }
        Ok(())
    }

    pub fn to_array(&self) -> [f64; 4] {
        [self.sigma_sq, self.range, self.smoothness, self.nugget]
    }

    pub fn from_array(a: [f64; 4]) -> Result<Self> {
        Self::new(a[0], a[1], a[2], a[3])
    }

    /// Marginal variance σ² + τ².
    pub fn total_variance(&self) -> f64 {
        self.sigma_sq + self.nugget
    }
}

pub const PARAM_NAMES: [&str; 4] = ["sigma_sq", "range", "smoothness", "nugget"];

/// Unconstrained coordinates `(log σ², log φ, logit ν, log τ²)` where the
/// logit maps `[0.05, 5]` onto the real line.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogParams(pub [f64; 4]);

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

fn sigmoid(u: f64) -> f64 {
    if u >= 0.0 {
        1.0 / (1.0 + (-u).exp())
    } else {
        let e = u.exp();
        e / (1.0 + e)
    }
}

impl LogParams {
    /// Maps to log coordinates. The flag is set when ν sat on (or beyond
    /// rounding of) a box edge and was pulled inside.
    pub fn from_params(p: &MaternParams) -> (Self, bool) {
        let width = SMOOTHNESS_MAX - SMOOTHNESS_MIN;
        let raw = (p.smoothness - SMOOTHNESS_MIN) / width;
        let q = raw.clamp(LOGIT_EPS, 1.0 - LOGIT_EPS);
        let u = [p.sigma_sq.ln(), p.range.ln(), logit(q), p.nugget.max(NUGGET_FLOOR).ln()];
        (Self(u), q != raw)
    }

    pub fn to_params(&self) -> MaternParams {
        let u = self.0;
        MaternParams {
            sigma_sq: u[0].exp(),
            range: u[1].exp(),
            smoothness: SMOOTHNESS_MIN + (SMOOTHNESS_MAX - SMOOTHNESS_MIN) * sigmoid(u[2]),
            nugget: u[3].exp(),
        }
    }

    /// Derivatives `dθ_k/du_k` of natural parameters with respect to the
    /// log coordinates.
    pub fn jacobian_diag(&self) -> [f64; 4] {
        let p = self.to_params();
        let nu = p.smoothness;
        [
            p.sigma_sq,
            p.range,
            (nu - SMOOTHNESS_MIN) * (SMOOTHNESS_MAX - nu) / (SMOOTHNESS_MAX - SMOOTHNESS_MIN),
            p.nugget,
        ]
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validation() {
        assert!(MaternParams::new(1.0, 1.0, 1.0, 0.0).is_ok());
        assert!(MaternParams::new(0.0, 1.0, 1.0, 0.0).is_err());
        assert!(MaternParams::new(1.0, -1.0, 1.0, 0.0).is_err());
        assert!(MaternParams::new(1.0, 1.0, 5.01, 0.0).is_err());
        assert!(MaternParams::new(1.0, 1.0, 0.04, 0.0).is_err());
        assert!(MaternParams::new(1.0, 1.0, 1.0, -1e-9).is_err());
        assert!(MaternParams::new(f64::NAN, 1.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn round_trip_unit() {
        let p = MaternParams::new(1.0, 1.0, 1.0, 1.0).unwrap();
        let (u, clamped) = LogParams::from_params(&p);
        assert!(!clamped);
        let back = u.to_params();
        for (a, b) in back.to_array().iter().zip(p.to_array()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_nugget_maps_to_floor() {
        let p = MaternParams::new(2.0, 0.3, 0.7, 0.0).unwrap();
        let (u, _) = LogParams::from_params(&p);
        assert!((u.to_params().nugget / 1e-12 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn boundary_smoothness_is_clamped() {
        let p = MaternParams::new(1.0, 1.0, 5.0, 0.1).unwrap();
        let (u, clamped) = LogParams::from_params(&p);
        assert!(clamped);
        assert!(u.is_finite());
        assert!((u.to_params().smoothness - 5.0).abs() < 1e-9);
        let (u, clamped) = LogParams::from_params(&MaternParams::new(1.0, 1.0, 0.05, 0.1).unwrap());
        assert!(clamped);
        assert!((u.to_params().smoothness - 0.05).abs() < 1e-9);
    }

    #[test]
    fn jacobian_matches_finite_difference() {
        let (u, _) = LogParams::from_params(&MaternParams::new(0.8, 0.2, 1.3, 0.05).unwrap());
        let jac = u.jacobian_diag();
        for k in 0..4 {
            let mut up = u;
            let mut dn = u;
            up.0[k] += 1e-6;
            dn.0[k] -= 1e-6;
            let fd = (up.to_params().to_array()[k] - dn.to_params().to_array()[k]) / 2e-6;
            assert!((fd - jac[k]).abs() < 1e-8 * jac[k].abs().max(1.0), "k={k}");
        }
    }
}
