use proptest::prelude::*;

use super::*;
use crate::model::{MaternParams, MeanSpec};
use crate::predict::SiteFlags;
use crate::simulate::{generate_pattern, simulate_gp, PatternKind, PatternSpec};

fn dataset(n: usize, range: f64, seed: u64) -> Dataset {
    let params = MaternParams::new(1.0, range, 0.5, 0.05).unwrap();
    let pts = generate_pattern(&PatternSpec { kind: PatternKind::homogeneous(), n, seed }).unwrap();
    let y = simulate_gp(&pts, &params, MeanSpec::Zero, &[], seed + 100).unwrap();
    Dataset::new(pts, y, MeanSpec::Zero).unwrap()
}

fn prediction(mean: &[f64], lower: &[f64], upper: &[f64]) -> PredictionSet {
    PredictionSet {
        locations: vec![[0.0, 0.0]; mean.len()],
        mean: mean.to_vec(),
        sd: vec![1.0; mean.len()],
        lower: lower.to_vec(),
        upper: upper.to_vec(),
        alpha: 0.05,
        flags: vec![SiteFlags::default(); mean.len()],
    }
}

#[test]
fn fold_sizes() {
    let plan = kfold_split(6, 3, 1).unwrap();
    assert_eq!(plan.fold_sizes(), vec![2, 2, 2]);
    let mut sizes = kfold_split(7, 3, 1).unwrap().fold_sizes();
    sizes.sort();
    assert_eq!(sizes, vec![2, 2, 3]);
    assert_eq!(kfold_split(100, 3, 9).unwrap(), kfold_split(100, 3, 9).unwrap());
    assert_ne!(kfold_split(100, 3, 9).unwrap(), kfold_split(100, 3, 10).unwrap());
    assert!(kfold_split(5, 1, 0).is_err());
    assert!(kfold_split(5, 6, 0).is_err());
}

#[test]
fn train_and_test_partition() {
    let plan = kfold_split(50, 4, 3).unwrap();
    for f in 0..4 {
        let (tr, te) = (plan.train_indices(f), plan.test_indices(f));
        assert_eq!(tr.len() + te.len(), 50);
        assert!(te.iter().all(|i| !tr.contains(i)));
    }
}

#[test]
fn hand_scores() {
    let p = prediction(&[0.0, 0.0], &[-1.0, 0.0], &[1.0, 2.0]);
    let s = score(&p, &[1.0, 3.0], 0.5).unwrap();
    assert_eq!((s.mspe, s.mape, s.picp, s.mpiw, s.wall_time_s), (5.0, 2.0, 0.5, 2.0, 0.5));
    let p = prediction(&[1.0, 2.0], &[0.0, 1.0], &[2.0, 3.0]);
    let s = score(&p, &[1.0, 2.0], 0.0).unwrap();
    assert_eq!((s.mspe, s.mape, s.picp), (0.0, 0.0, 1.0));
    assert!(matches!(score(&p, &[1.0], 0.0), Err(Error::DimensionMismatch { .. })));
}

#[test]
fn method_names_round_trip() {
    for m in MethodKind::ALL {
        assert_eq!(m.name().parse::<MethodKind>().unwrap(), m);
    }
    let err = "gapfill".parse::<MethodKind>().unwrap_err().to_string();
    assert!(err.contains("gapfill") && err.contains("local_gaussian"), "{err}");
}

#[test]
fn single_method_single_row() {
    let d = dataset(120, 0.1, 1);
    let plan = kfold_split(d.len(), 3, 2).unwrap();
    let report = run_benchmark(&d, &[MethodSpec::new(MethodKind::LocalGaussian)], &plan).unwrap();
    assert_eq!(report.summary.len(), 1);
    assert_eq!(report.rows.len(), 3);
    assert!(report.table(false).lines().count() == 2);
    assert!(run_benchmark(&d, &[], &plan).is_err());
}

#[test]
fn failures_become_missing_rows() {
    // Twelve sites leave eight for training, below the fitting minimum.
    let d = dataset(12, 0.1, 3);
    let plan = kfold_split(d.len(), 3, 0).unwrap();
    let methods = [MethodSpec::new(MethodKind::Vecchia), MethodSpec::new(MethodKind::LocalGaussian)];
    let report = run_benchmark(&d, &methods, &plan).unwrap();
    assert!(report.rows[..3].iter().all(|r| r.scores.is_none() && r.error.is_some()));
    assert!(report.rows[3..].iter().all(|r| r.scores.is_some()));
    assert_eq!(report.summary[0].mean, None);
    let mut csv = Vec::new();
    report.write_csv(&mut csv, true).unwrap();
    let text = String::from_utf8(csv).unwrap();
    assert!(text.contains("vecchia,0,,,,,\n") && text.contains("vecchia,mean,,,,,\n"), "{text}");
    assert_eq!(text.lines().count(), 1 + 6 + 2);
}

#[test]
fn benchmark_is_reproducible() {
    let d = dataset(150, 0.1, 4);
    let plan = kfold_split(d.len(), 3, 5).unwrap();
    let mut v = MethodSpec::new(MethodKind::Vecchia);
    v.fit.m_seq = vec![10];
    let methods = [v, MethodSpec::new(MethodKind::LocalKrige), MethodSpec::new(MethodKind::LocalGaussian)];
    let csv = || {
        let mut out = Vec::new();
        run_benchmark(&d, &methods, &plan).unwrap().write_csv(&mut out, false).unwrap();
        out
    };
    assert_eq!(csv(), csv());
}

#[test]
fn exact_and_full_vecchia_agree() {
    let d = dataset(300, 0.15, 6);
    let plan = kfold_split(d.len(), 3, 7).unwrap();
    // A flat likelihood lets the two optimizer paths stop a few iterations
    // apart under default tolerances; drive both to the optimum.
    let tight = FitConfig { m_seq: vec![299], rel_tol: 1e-13, grad_tol: 1e-7, ..FitConfig::default() };
    let mut exact = MethodSpec::new(MethodKind::Exact);
    exact.fit = tight.clone();
    let mut vecchia = MethodSpec::new(MethodKind::Vecchia);
    vecchia.fit = tight;
    vecchia.predict.m_pred = 300;
    let report = run_benchmark(&d, &[exact, vecchia], &plan).unwrap();
    let (a, b) = (report.summary[0].mean.unwrap(), report.summary[1].mean.unwrap());
    assert!((a.mspe - b.mspe).abs() < 1e-6, "{a:?} {b:?}");
}

proptest! {
    #[test]
    fn score_permutation_invariant(
        rows in prop::collection::vec((-5.0..5.0f64, 0.0..3.0f64, -5.0..5.0f64), 1..40),
        shift in 0usize..40,
    ) {
        let mean: Vec<f64> = rows.iter().map(|r| r.0).collect();
        let lower: Vec<f64> = rows.iter().map(|r| r.0 - r.1).collect();
        let upper: Vec<f64> = rows.iter().map(|r| r.0 + r.1).collect();
        let truth: Vec<f64> = rows.iter().map(|r| r.2).collect();
        let a = score(&prediction(&mean, &lower, &upper), &truth, 0.0).unwrap();
        let k = shift % rows.len();
        let rot = |v: &[f64]| { let mut v = v.to_vec(); v.rotate_left(k); v };
        let b = score(&prediction(&rot(&mean), &rot(&lower), &rot(&upper)), &rot(&truth), 0.0).unwrap();
        prop_assert_eq!(a.picp, b.picp);
        prop_assert!((a.mspe - b.mspe).abs() <= 1e-12 * (1.0 + a.mspe));
        prop_assert!((a.mape - b.mape).abs() <= 1e-12 * (1.0 + a.mape));
        prop_assert!((a.mpiw - b.mpiw).abs() <= 1e-12 * (1.0 + a.mpiw));
    }

    #[test]
    fn widening_never_lowers_picp(
        rows in prop::collection::vec((-5.0..5.0f64, 0.0..3.0f64, -5.0..5.0f64), 1..40),
        extra in 1e-9..2.0f64,
    ) {
        let mean: Vec<f64> = rows.iter().map(|r| r.0).collect();
        let lower: Vec<f64> = rows.iter().map(|r| r.0 - r.1).collect();
        let upper: Vec<f64> = rows.iter().map(|r| r.0 + r.1).collect();
        let truth: Vec<f64> = rows.iter().map(|r| r.2).collect();
        let a = score(&prediction(&mean, &lower, &upper), &truth, 0.0).unwrap();
        let wl: Vec<f64> = lower.iter().map(|v| v - extra).collect();
        let wu: Vec<f64> = upper.iter().map(|v| v + extra).collect();
        let b = score(&prediction(&mean, &wl, &wu), &truth, 0.0).unwrap();
        prop_assert!(b.picp >= a.picp);
        prop_assert!(a.mspe >= 0.0 && a.mape >= 0.0 && (0.0..=1.0).contains(&a.picp) && a.mpiw >= 0.0);
    }
}
