use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geo::dist;
use crate::model::Dataset;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariogramConfig {
    pub n_bins: usize,
    /// Defaults to half the bounding-box diagonal.
    pub max_dist: Option<f64>,
    /// Above this many pairs a seeded uniform pair sample is used.
    pub max_pairs: usize,
    pub seed: u64,
}

impl Default for VariogramConfig {
    fn default() -> Self {
        Self { n_bins: 20, max_dist: None, max_pairs: 1_000_000, seed: 0 }
    }
}

/// Equal-width bins on `[0, max_dist]`. Empty bins report zero
/// semivariance with a zero count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariogramEstimate {
    pub bin_centers: Vec<f64>,
    pub semivariance: Vec<f64>,
    pub counts: Vec<u64>,
}

/// Matheron estimator `γ̂(h) = Σ (y_i − y_j)² / (2 |N(h)|)`.
pub fn empirical_variogram(data: &Dataset, config: &VariogramConfig) -> Result<VariogramEstimate> {
    let n = data.len();
    if n < 2 {
        return Err(Error::InvalidArgument(format!("variogram needs at least 2 sites, got {n}")));
    }
    if config.n_bins == 0 {
        return Err(Error::InvalidArgument("n_bins must be positive".into()));
    }
    if config.max_pairs == 0 {
        return Err(Error::InvalidArgument("max_pairs must be positive".into()));
    }
    let max_dist = config.max_dist.unwrap_or(0.5 * data.points.diagonal());
    if !(max_dist > 0.0 && max_dist.is_finite()) {
        return Err(Error::InvalidArgument(format!("max_dist must be positive, got {max_dist}")));
    }
    let width = max_dist / config.n_bins as f64;
    let mut sums = vec![0.0; config.n_bins];
    let mut counts = vec![0u64; config.n_bins];
    let pts = data.points.coords();
    let y = &data.responses;
    let mut add = |i: usize, j: usize| {
        let d = dist(pts[i], pts[j]);
        if d <= max_dist {
            let b = ((d / width) as usize).min(config.n_bins - 1);
            sums[b] += (y[i] - y[j]).powi(2);
            counts[b] += 1;
        }
    };
    let total_pairs = (n as u128) * (n as u128 - 1) / 2;
    if total_pairs <= config.max_pairs as u128 {
        for i in 1..n {
            for j in 0..i {
                add(i, j);
            }
        }
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        for _ in 0..config.max_pairs {
            let i = rng.random_range(0..n);
            let mut j = rng.random_range(0..n - 1);
            if j >= i {
                j += 1;
            }
            add(i, j);
        }
    }
    let semivariance = sums.iter().zip(&counts).map(|(s, &c)| if c > 0 { s / (2.0 * c as f64) } else { 0.0 }).collect();
    let bin_centers = (0..config.n_bins).map(|b| (b as f64 + 0.5) * width).collect();
    Ok(VariogramEstimate { bin_centers, semivariance, counts })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geo::PointSet;
    use crate::model::{MaternParams, MeanSpec};
    use crate::simulate::{generate_pattern, simulate_gp, PatternKind, PatternSpec};
    use rand_distr::StandardNormal;

    fn uniform(n: usize, seed: u64) -> PointSet {
        generate_pattern(&PatternSpec { kind: PatternKind::Homogeneous, n, seed }).unwrap()
    }

    #[test]
    fn constant_field_is_flat_zero() {
        let d = Dataset::new(uniform(200, 1), vec![3.5; 200], MeanSpec::Zero).unwrap();
        let v = empirical_variogram(&d, &VariogramConfig::default()).unwrap();
        assert!(v.semivariance.iter().all(|&g| g == 0.0));
        assert!(v.bin_centers.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn iid_noise_is_flat_at_its_variance() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let y: Vec<f64> = (0..3000).map(|_| 2.0 * rng.sample::<f64, _>(StandardNormal)).collect();
        let d = Dataset::new(uniform(3000, 2), y, MeanSpec::Zero).unwrap();
        let v = empirical_variogram(&d, &VariogramConfig::default()).unwrap();
        for (g, c) in v.semivariance.iter().zip(&v.counts) {
            assert!(*c > 0 && (g / 4.0 - 1.0).abs() < 0.15, "{g}");
        }
    }

    #[test]
    fn gp_rises_from_nugget_to_sill() {
        let pts = uniform(2000, 3);
        let p = MaternParams::new(1.0, 0.03, 1.0, 0.2).unwrap();
        let y = simulate_gp(&pts, &p, MeanSpec::Zero, &[], 9).unwrap();
        let d = Dataset::new(pts, y, MeanSpec::Zero).unwrap();
        let v = empirical_variogram(&d, &VariogramConfig::default()).unwrap();
        assert!(v.semivariance[0] > 0.2 * 0.8, "{:?}", v.semivariance);
        let far = *v.semivariance.last().unwrap();
        assert!((far / 1.2 - 1.0).abs() < 0.2, "{far}");
    }

    #[test]
    fn permutation_leaves_it_unchanged() {
        let pts = uniform(300, 4);
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let y: Vec<f64> = (0..300).map(|_| rng.sample(StandardNormal)).collect();
        let a = empirical_variogram(&Dataset::new(pts.clone(), y.clone(), MeanSpec::Zero).unwrap(), &VariogramConfig::default()).unwrap();
        let perm: Vec<usize> = (0..300).rev().collect();
        let yp: Vec<f64> = perm.iter().map(|&i| y[i]).collect();
        let b = empirical_variogram(&Dataset::new(pts.subset(&perm).unwrap(), yp, MeanSpec::Zero).unwrap(), &VariogramConfig::default()).unwrap();
        assert_eq!(a.counts, b.counts);
        for (x, y) in a.semivariance.iter().zip(&b.semivariance) {
            assert!((x - y).abs() <= 1e-12 * x.abs().max(1.0));
        }
    }

    #[test]
    fn pair_subsampling_is_seeded() {
        let pts = uniform(500, 7);
        let y: Vec<f64> = pts.coords().iter().map(|p| p[0]).collect();
        let d = Dataset::new(pts, y, MeanSpec::Zero).unwrap();
        let cfg = VariogramConfig { max_pairs: 10_000, ..Default::default() };
        let a = empirical_variogram(&d, &cfg).unwrap();
        assert_eq!(a, empirical_variogram(&d, &cfg).unwrap());
        assert!(a.counts.iter().sum::<u64>() <= 10_000);
        let zero_bins = VariogramConfig { n_bins: 0, ..Default::default() };
        assert!(empirical_variogram(&d, &zero_bins).is_err());
    }
}
