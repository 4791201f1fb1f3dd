use serde::{Deserialize, Serialize};

use spatialgp::fit::{wald_row, WaldRow};
use spatialgp::numerics::{cholesky, DenseMatrix};

use crate::error::{CliError, Result};

/// Ordinary least-squares plane `b0 + b1 x + b2 y`, removed before fitting
/// and added back to predictions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detrend {
    pub coefficients: [f64; 3],
    pub std_errors: [f64; 3],
}

pub const TREND_NAMES: [&str; 3] = ["intercept", "x", "y"];

impl Detrend {
    pub fn fit(coords: &[[f64; 2]], values: &[f64]) -> Result<Self> {
        let n = coords.len();
        if n <= 3 {
            return Err(CliError::Usage(format!("detrending needs more than 3 sites, got {n}")));
        }
        let mut gram = DenseMatrix::zeros(3, 3);
        let mut rhs = [0.0; 3];
        for (p, &v) in coords.iter().zip(values) {
            let row = [1.0, p[0], p[1]];
            for a in 0..3 {
                rhs[a] += row[a] * v;
                for b in 0..3 {
                    gram[(a, b)] += row[a] * row[b];
                }
            }
        }
        let factor = cholesky(&gram).map_err(|_| CliError::Usage("sites are collinear; cannot fit a plane".into()))?;
        let beta = factor.solve(&rhs)?;
        let coefficients = [beta[0], beta[1], beta[2]];
        let rss: f64 = coords.iter().zip(values).map(|(p, v)| (v - plane(&coefficients, *p)).powi(2)).sum();
        let s2 = rss / (n - 3) as f64;
        let inv = factor.inverse();
        let std_errors = [0, 1, 2].map(|k| (s2 * inv[(k, k)]).sqrt());
        Ok(Self { coefficients, std_errors })
    }

    pub fn at(&self, p: [f64; 2]) -> f64 {
        plane(&self.coefficients, p)
    }

    pub fn table(&self) -> Vec<WaldRow> {
        (0..3).map(|k| wald_row(TREND_NAMES[k], self.coefficients[k], Some(self.std_errors[k]))).collect()
    }
}

fn plane(b: &[f64; 3], p: [f64; 2]) -> f64 {
    b[0] + b[1] * p[0] + b[2] * p[1]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_plane_is_recovered() {
        let coords: Vec<[f64; 2]> = (0..20).map(|i| [(i % 5) as f64 * 0.2, (i / 5) as f64 * 0.25]).collect();
        let values: Vec<f64> = coords.iter().map(|p| 2.0 + p[0] - p[1]).collect();
        let d = Detrend::fit(&coords, &values).unwrap();
        for (a, b) in d.coefficients.iter().zip([2.0, 1.0, -1.0]) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!(d.std_errors.iter().all(|s| *s < 1e-6));
    }

    #[test]
    fn standard_errors_match_hand_formula() {
        let coords = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0], [0.5, 0.5]];
        let values = [0.0, 1.0, 1.0, 2.0, 2.0];
        let d = Detrend::fit(&coords, &values).unwrap();
        // Normal equations give b = (0.2, 1, 1) by hand.
        assert!((d.coefficients[0] - 0.2).abs() < 1e-12 && (d.coefficients[1] - 1.0).abs() < 1e-12);
        let rss: f64 = coords.iter().zip(values).map(|(p, v)| (v - d.at(*p)).powi(2)).sum();
        // The intercept entry of (XᵀX)⁻¹ is 3.5 / 5 for this design.
        assert!((d.std_errors[0] - (rss / 2.0 * 0.7).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn collinear_sites_rejected() {
        let coords: Vec<[f64; 2]> = (0..10).map(|i| [i as f64, 2.0 * i as f64]).collect();
        assert!(Detrend::fit(&coords, &[1.0; 10]).is_err());
    }
}
