//! Synthetic data: dense-Cholesky Gaussian-process draws, point patterns on
//! the unit square, and empirical semivariograms.

mod gp;
mod pattern;
mod variogram;

pub use gp::{simulate_gp, GpSampler, DEFAULT_SIMULATION_MAX_N};
pub use pattern::{generate_pattern, PatternKind, PatternSpec};
pub use variogram::{empirical_variogram, VariogramConfig, VariogramEstimate};

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geo::PointSet;
    use crate::model::{cov_matrix, MaternParams, MeanSpec};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn uniform(n: usize, seed: u64) -> PointSet {
        generate_pattern(&PatternSpec { kind: PatternKind::Homogeneous, n, seed }).unwrap()
    }

    #[test]
    fn single_site_is_the_first_normal() {
        let pts = PointSet::new(vec![[0.3, 0.4]]).unwrap();
        let p = MaternParams::new(0.75, 0.1, 1.0, 0.25).unwrap();
        let y = simulate_gp(&pts, &p, MeanSpec::Zero, &[], 42).unwrap();
        let z: f64 = ChaCha8Rng::seed_from_u64(42).sample(StandardNormal);
        assert!((y[0] - z).abs() < 1e-15);
    }

    #[test]
    fn pure_nugget_is_uncorrelated() {
        let pts = uniform(2000, 1);
        let p = MaternParams::new(1e-10, 0.1, 1.0, 1.0).unwrap();
        let y = simulate_gp(&pts, &p, MeanSpec::Zero, &[], 3).unwrap();
        // Pair each site with its nearest neighbor.
        let tree = crate::geo::KdTree::new(&pts);
        let pairs: Vec<(f64, f64)> =
            (0..2000).map(|i| (y[i], y[tree.nearest(pts.get(i), 2)[1].index])).collect();
        let r = correlation(&pairs);
        assert!(r.abs() < 0.05, "{r}");
    }

    fn correlation(pairs: &[(f64, f64)]) -> f64 {
        let n = pairs.len() as f64;
        let (ma, mb) = (pairs.iter().map(|p| p.0).sum::<f64>() / n, pairs.iter().map(|p| p.1).sum::<f64>() / n);
        let cov: f64 = pairs.iter().map(|p| (p.0 - ma) * (p.1 - mb)).sum();
        let va: f64 = pairs.iter().map(|p| (p.0 - ma).powi(2)).sum();
        let vb: f64 = pairs.iter().map(|p| (p.1 - mb).powi(2)).sum();
        cov / (va * vb).sqrt()
    }

    #[test]
    fn sample_variance_near_total_variance() {
        let pts = uniform(3000, 2);
        let p = MaternParams::new(1.0, 0.05, 1.0, 0.1).unwrap();
        let y = simulate_gp(&pts, &p, MeanSpec::Zero, &[], 11).unwrap();
        let m = y.iter().sum::<f64>() / 3000.0;
        let v = y.iter().map(|v| (v - m).powi(2)).sum::<f64>() / 2999.0;
        assert!((0.95..=1.25).contains(&v), "{v}");
    }

    #[test]
    fn sample_covariance_matches_model() {
        let pts = PointSet::new(vec![[0.1, 0.1], [0.15, 0.1], [0.3, 0.4], [0.8, 0.2], [0.5, 0.9]]).unwrap();
        let p = MaternParams::new(1.0, 0.2, 1.5, 0.1).unwrap();
        let sampler = GpSampler::new(&pts, &p, MeanSpec::Zero, &[]).unwrap();
        let draws: Vec<Vec<f64>> = (0..500).map(|s| sampler.draw(s)).collect();
        let c = cov_matrix(&pts, &pts, &p, true).unwrap();
        for i in 0..5 {
            for j in 0..5 {
                let s = draws.iter().map(|d| d[i] * d[j]).sum::<f64>() / 500.0;
                let target = c[(i, j)];
                let ok = if target.abs() < 0.25 { (s - target).abs() < 0.05 + 0.2 * target.abs() } else { (s / target - 1.0).abs() < 0.2 };
                assert!(ok, "({i},{j}) {s} vs {target}");
            }
        }
    }

    #[test]
    fn trend_is_added() {
        let pts = uniform(50, 4);
        let p = MaternParams::new(1e-10, 0.1, 0.5, 1e-10).unwrap();
        let y = simulate_gp(&pts, &p, MeanSpec::Linear, &[2.0, 1.0, -1.0], 0).unwrap();
        for (v, q) in y.iter().zip(pts.coords()) {
            assert!((v - (2.0 + q[0] - q[1])).abs() < 1e-3);
        }
        assert!(simulate_gp(&pts, &p, MeanSpec::Linear, &[1.0], 0).is_err());
    }

    #[test]
    fn guard() {
        let pts = uniform(20, 5);
        let p = MaternParams::new(1.0, 0.1, 1.0, 0.1).unwrap();
        assert!(matches!(
            GpSampler::with_guard(&pts, &p, MeanSpec::Zero, &[], 10),
            Err(crate::Error::SizeGuard { .. })
        ));
    }
}
