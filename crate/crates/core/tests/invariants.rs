//! Property tests for invariants that hold for every input, with oracles
//! written independently of the library's own linear algebra.

use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use spatialgp::geo::{decluster_weights, dist, maxmin_order, vecchia_plan, voronoi_partition, weighted_subsample, PointSet};
use spatialgp::likelihood::{exact_loglik, vecchia_loglik};
use spatialgp::model::{cov_matrix, matern_cov, Dataset, MaternParams, MeanSpec};
use spatialgp::numerics::{bessel_k, cholesky, normal_quantile, skew_normal_cdf, skew_normal_quantile, DenseMatrix, SkewNormalParams};
use spatialgp::predict::{predict_with_model, FittedModel, PredictConfig, PredictionTarget};
use spatialgp::simulate::{empirical_variogram, generate_pattern, PatternKind, PatternSpec, VariogramConfig};

fn cases(n: u32) -> ProptestConfig {
    ProptestConfig::with_cases(n)
}

fn points(max: usize) -> impl Strategy<Value = Vec<[f64; 2]>> {
    prop::collection::vec((0.0..1.0f64, 0.0..1.0f64).prop_map(|(x, y)| [x, y]), 2..max)
}

fn params() -> impl Strategy<Value = MaternParams> {
    (0.2..3.0f64, 0.02..0.5f64, 0.2..3.0f64, 0.0..0.5f64)
        .prop_map(|(s, r, nu, t)| MaternParams::new(s, r, nu, t).unwrap())
}

/// Gauss–Jordan with partial pivoting; returns `(A⁻¹ b, ln|det A|)`.
fn gauss_solve(a: &[Vec<f64>], b: &[f64]) -> (Vec<f64>, f64) {
    let n = b.len();
    let mut m: Vec<Vec<f64>> = a.iter().zip(b).map(|(r, v)| r.iter().copied().chain([*v]).collect()).collect();
    let mut log_det = 0.0;
    for c in 0..n {
        let p = (c..n).max_by(|&i, &j| m[i][c].abs().total_cmp(&m[j][c].abs())).unwrap();
        m.swap(c, p);
        let piv = m[c][c];
        log_det += piv.abs().ln();
        for k in c..=n {
            m[c][k] /= piv;
        }
        for r in 0..n {
            if r != c {
                let f = m[r][c];
                for k in c..=n {
                    m[r][k] -= f * m[c][k];
                }
            }
        }
    }
    (m.iter().map(|r| r[n]).collect(), log_det)
}

fn noisy_cov(coords: &[[f64; 2]], p: &MaternParams) -> Vec<Vec<f64>> {
    coords
        .iter()
        .enumerate()
        .map(|(i, a)| coords.iter().enumerate().map(|(j, b)| matern_cov(dist(*a, *b), p, i == j).unwrap()).collect())
        .collect()
}

fn seeded_values(n: usize, seed: u64) -> Vec<f64> {
    use rand::Rng;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect()
}

proptest! {
    #![proptest_config(cases(64))]

    #[test]
    fn bessel_recurrence(nu in 1.0..4.0f64, x in 0.05..40.0f64) {
        let (km, k, kp) = (bessel_k(nu - 1.0, x).unwrap(), bessel_k(nu, x).unwrap(), bessel_k(nu + 1.0, x).unwrap());
        prop_assert!((kp - km - 2.0 * nu / x * k).abs() <= 1e-8 * kp);
    }

    #[test]
    fn scaled_bessel_is_monotone(nu in 0.05..5.0f64) {
        // √x eˣ K_ν(x) → √(π/2) with leading correction (4ν² − 1)/8x, so it
        // falls for ν > 1/2 and rises for ν < 1/2.
        let sign = if nu >= 0.5 { 1.0 } else { -1.0 };
        let mut prev: Option<f64> = None;
        for i in 0..=98 {
            let x = 1.0 + 0.5 * i as f64;
            let v = sign * bessel_k(nu, x).unwrap() * x.exp() * x.sqrt();
            if let Some(prev) = prev {
                prop_assert!(v <= prev + 1e-12 * prev.abs(), "ν={nu} x={x}");
            }
            prev = Some(v);
        }
    }

    #[test]
    fn cholesky_log_det_matches_elimination(coords in points(9), p in params()) {
        let p = MaternParams { nugget: p.nugget.max(1e-3), ..p };
        let c = noisy_cov(&coords, &p);
        let n = coords.len();
        let m = DenseMatrix::from_fn(n, n, |i, j| c[i][j]);
        let (_, brute) = gauss_solve(&c, &vec![0.0; n]);
        let ld = cholesky(&m).unwrap().log_det();
        prop_assert!((ld - brute).abs() <= 1e-6 * brute.abs().max(1.0), "{ld} vs {brute}");
    }

    #[test]
    fn skew_normal_quantile_inverts_cdf(loc in -5.0..5.0f64, scale in 0.1..5.0f64, shape in -8.0..8.0f64, u in 0.005..0.995f64) {
        let sn = SkewNormalParams::new(loc, scale, shape).unwrap();
        let x = skew_normal_quantile(u, &sn).unwrap();
        let back = skew_normal_quantile(skew_normal_cdf(x, &sn), &sn).unwrap();
        prop_assert!((back - x).abs() <= 1e-6 * (1.0 + x.abs()));
    }

    #[test]
    fn voronoi_assigns_nearest_center(coords in points(300), k in 1usize..12, seed in any::<u64>()) {
        let pts = PointSet::new(coords.clone()).unwrap();
        let k = k.min(coords.len());
        let part = voronoi_partition(&pts, k, seed).unwrap();
        for (i, p) in coords.iter().enumerate() {
            let own = dist(*p, coords[part.centers[part.assignment[i] - 1]]);
            for &c in &part.centers {
                prop_assert!(own <= dist(*p, coords[c]));
            }
        }
    }

    #[test]
    fn maxmin_prefix_property(coords in points(120)) {
        let pts = PointSet::new(coords.clone()).unwrap();
        let order = maxmin_order(&pts);
        for i in 1..order.len() {
            let to_prefix = |q: usize| order[..i].iter().map(|&j| dist(coords[q], coords[j])).fold(f64::INFINITY, f64::min);
            let chosen = to_prefix(order[i]);
            for &q in &order[i..] {
                prop_assert!(chosen >= to_prefix(q));
            }
        }
    }

    #[test]
    fn decluster_weights_permute_with_points(coords in points(200), seed in any::<u64>(), radius in 0.01..0.3f64) {
        let mut perm: Vec<usize> = (0..coords.len()).collect();
        perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let shuffled: Vec<[f64; 2]> = perm.iter().map(|&i| coords[i]).collect();
        let a = decluster_weights(&PointSet::new(coords).unwrap(), radius).unwrap();
        let b = decluster_weights(&PointSet::new(shuffled).unwrap(), radius).unwrap();
        for (k, &i) in perm.iter().enumerate() {
            prop_assert!((b.weights[k] - a.weights[i]).abs() <= 1e-12 * a.weights[i].abs().max(1e-300));
        }
    }

    #[test]
    fn subsample_is_distinct_and_supported(coords in points(200), seed in any::<u64>(), frac in 0.05..1.0f64) {
        let w = decluster_weights(&PointSet::new(coords.clone()).unwrap(), 0.05).unwrap();
        let size = ((frac * coords.len() as f64) as usize).max(1);
        let idx = weighted_subsample(&w, size, seed).unwrap();
        prop_assert_eq!(idx.len(), size);
        let mut sorted = idx.clone();
        sorted.sort_unstable();
        sorted.dedup();
        prop_assert_eq!(sorted.len(), size);
        prop_assert!(idx.iter().all(|&i| w.weights[i] > 0.0));
    }

    #[test]
    fn matern_correlation_in_unit_interval(d in 0.0..10.0f64, p in params()) {
        let latent = MaternParams { nugget: 0.0, ..p };
        let r = matern_cov(d, &latent, false).unwrap() / p.sigma_sq;
        prop_assert!(r > 0.0 || d / p.range > 50.0);
        prop_assert!(r <= 1.0);
        prop_assert!(d == 0.0 || r < 1.0 || d / p.range < 1e-7);
    }

    #[test]
    fn matern_three_halves_closed_form(d in 0.0..5.0f64, range in 0.01..2.0f64, s in 0.1..3.0f64) {
        let p = MaternParams::new(s, range, 1.5, 0.0).unwrap();
        let x = d / range;
        // Half-integer closed form in the √(2ν)-free (d/φ) parameterization.
        let want = s * (1.0 + x) * (-x).exp();
        prop_assert!((matern_cov(d, &p, false).unwrap() - want).abs() <= 1e-10 * s);
    }

    #[test]
    fn cov_matrix_positive_definite(coords in points(9), p in params()) {
        let p = MaternParams { nugget: p.nugget.max(1e-8), ..p };
        let pts = PointSet::new(coords).unwrap();
        prop_assert!(cholesky(&cov_matrix(&pts, &pts, &p, true).unwrap()).is_ok());
    }

    #[test]
    fn cov_matrix_scale_consistent(coords in points(9), p in params()) {
        let pts = PointSet::new(coords.clone()).unwrap();
        let doubled = PointSet::new(coords.iter().map(|c| [2.0 * c[0], 2.0 * c[1]]).collect()).unwrap();
        let q = MaternParams { range: 2.0 * p.range, ..p };
        let (a, b) = (cov_matrix(&pts, &pts, &p, true).unwrap(), cov_matrix(&doubled, &doubled, &q, true).unwrap());
        for (x, y) in a.as_slice().iter().zip(b.as_slice()) {
            prop_assert!((x - y).abs() <= 1e-12 * p.total_variance());
        }
    }
}

proptest! {
    #![proptest_config(cases(32))]

    #[test]
    fn vecchia_is_sum_of_conditionals(coords in points(40), p in params(), m in 1usize..8, seed in any::<u64>()) {
        let p = MaternParams { nugget: p.nugget.max(1e-3), ..p };
        let pts = PointSet::new(coords.clone()).unwrap();
        let y = seeded_values(coords.len(), seed);
        let data = Dataset::new(pts.clone(), y.clone(), MeanSpec::Zero).unwrap();
        let plan = vecchia_plan(&pts, m);
        let order = plan.permutation().to_vec();
        let mut total = 0.0;
        for i in 0..order.len() {
            let g: Vec<usize> = plan.neighbors(i).iter().map(|&q| order[q]).collect();
            let site = order[i];
            let var_ii = matern_cov(0.0, &p, true).unwrap();
            let (mean, var) = if g.is_empty() {
                (0.0, var_ii)
            } else {
                let gc: Vec<[f64; 2]> = g.iter().map(|&j| coords[j]).collect();
                let c_gg = noisy_cov(&gc, &p);
                let c_ig: Vec<f64> = gc.iter().map(|c| matern_cov(dist(coords[site], *c), &p, false).unwrap()).collect();
                let (w, _) = gauss_solve(&c_gg, &c_ig);
                let yg: Vec<f64> = g.iter().map(|&j| y[j]).collect();
                (w.iter().zip(&yg).map(|(a, b)| a * b).sum::<f64>(), var_ii - w.iter().zip(&c_ig).map(|(a, b)| a * b).sum::<f64>())
            };
            total += -0.5 * (2.0 * std::f64::consts::PI * var).ln() - (y[site] - mean).powi(2) / (2.0 * var);
        }
        let v = vecchia_loglik(&data, &p, &plan).unwrap().value;
        prop_assert!((v - total).abs() <= 1e-9 * total.abs().max(1.0), "{v} vs {total}");
    }

    #[test]
    fn constant_shift_moves_only_the_intercept(coords in points(40), p in params(), c in -50.0..50.0f64, seed in any::<u64>()) {
        let p = MaternParams { nugget: p.nugget.max(1e-3), ..p };
        let pts = PointSet::new(coords.clone()).unwrap();
        let y = seeded_values(coords.len(), seed);
        let shifted: Vec<f64> = y.iter().map(|v| v + c).collect();
        let plan = vecchia_plan(&pts, 5);
        let a = vecchia_loglik(&Dataset::new(pts.clone(), y, MeanSpec::Constant).unwrap(), &p, &plan).unwrap();
        let b = vecchia_loglik(&Dataset::new(pts, shifted, MeanSpec::Constant).unwrap(), &p, &plan).unwrap();
        prop_assert!((a.value - b.value).abs() <= 1e-8 * a.value.abs().max(1.0));
        prop_assert!((b.beta_hat[0] - a.beta_hat[0] - c).abs() <= 1e-8 * (1.0 + c.abs()));
    }

    #[test]
    fn zero_mean_has_no_coefficients(coords in points(30), p in params(), seed in any::<u64>()) {
        let pts = PointSet::new(coords.clone()).unwrap();
        let p = MaternParams { nugget: p.nugget.max(1e-3), ..p };
        let data = Dataset::new(pts, seeded_values(coords.len(), seed), MeanSpec::Zero).unwrap();
        prop_assert!(exact_loglik(&data, &p).unwrap().beta_hat.is_empty());
    }

    #[test]
    fn predictive_variance_bounded_and_nested(seed in any::<u64>(), p in params(), latent in any::<bool>()) {
        let pts = generate_pattern(&PatternSpec { kind: PatternKind::homogeneous(), n: 150, seed }).unwrap();
        let data = Dataset::new(pts, seeded_values(150, seed), MeanSpec::Zero).unwrap();
        let model = FittedModel::new(p, MeanSpec::Zero, vec![]).unwrap();
        let target = if latent { PredictionTarget::Latent } else { PredictionTarget::Response };
        let sites: Vec<[f64; 2]> = seeded_values(20, seed ^ 1).chunks(2).map(|c| [0.5 + 0.5 * c[0], 0.5 + 0.5 * c[1]]).collect();
        let mut prev: Option<Vec<f64>> = None;
        for m in [5, 20, 100] {
            let cfg = PredictConfig { m_pred: m, target, ..PredictConfig::default() };
            let pred = predict_with_model(&data, &model, &sites, &cfg).unwrap();
            for (j, sd) in pred.sd.iter().enumerate() {
                prop_assert!(sd * sd <= p.total_variance() + 1e-9);
                prop_assert!((pred.upper[j] - pred.lower[j] - 3.919928 * sd).abs() < 1e-6);
                if let Some(prev) = &prev {
                    prop_assert!(sd * sd <= prev[j] * prev[j] + 1e-9, "m={m} site {j}");
                }
            }
            prev = Some(pred.sd);
        }
    }

    #[test]
    fn patterns_fill_the_unit_square(kind in 0usize..5, n in 1usize..600, seed in any::<u64>()) {
        let kinds = [
            PatternKind::homogeneous(),
            PatternKind::dense_subregion(),
            PatternKind::nested_density(),
            PatternKind::striped_gaps(),
            PatternKind::circular_clusters(),
        ];
        let pts = generate_pattern(&PatternSpec { kind: kinds[kind].clone(), n, seed }).unwrap();
        prop_assert_eq!(pts.len(), n);
        prop_assert!(pts.coords().iter().all(|p| (0.0..=1.0).contains(&p[0]) && (0.0..=1.0).contains(&p[1])));
    }

    #[test]
    fn variogram_ignores_observation_order(coords in points(150), seed in any::<u64>()) {
        let y = seeded_values(coords.len(), seed);
        let mut perm: Vec<usize> = (0..coords.len()).collect();
        perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let a = Dataset::new(PointSet::new(coords.clone()).unwrap(), y.clone(), MeanSpec::Zero).unwrap();
        let b = Dataset::new(
            PointSet::new(perm.iter().map(|&i| coords[i]).collect()).unwrap(),
            perm.iter().map(|&i| y[i]).collect(),
            MeanSpec::Zero,
        ).unwrap();
        let cfg = VariogramConfig::default();
        let (va, vb) = (empirical_variogram(&a, &cfg).unwrap(), empirical_variogram(&b, &cfg).unwrap());
        prop_assert_eq!(&va.counts, &vb.counts);
        for (x, y) in va.semivariance.iter().zip(&vb.semivariance) {
            prop_assert!((x - y).abs() <= 1e-12 * x.abs().max(1e-300));
        }
    }
}

#[test]
fn normal_quantile_reference() {
    assert!((normal_quantile(0.975) - 1.959_963_984_540_054).abs() < 1e-12);
}
