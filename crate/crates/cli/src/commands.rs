use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use spatialgp::evalbench::{kfold_split, run_benchmark, MethodKind, MethodSpec};
use spatialgp::fit::{fit_model, wald_summary, FitConfig, FitResult, LikelihoodKind, WaldRow};
use spatialgp::geo::PointSet;
use spatialgp::model::{Dataset, MaternParams, MeanSpec};
use spatialgp::predict::{vecchia_predict, LocalConfig, PredictConfig, PredictionSet, PredictionTarget};
use spatialgp::simulate::{empirical_variogram, generate_pattern, simulate_gp, PatternKind, PatternSpec, VariogramConfig};
use spatialgp::uq::{bootstrap_ci, BootstrapConfig};

use crate::config::RunConfig;
use crate::data::{dataset_csv, read_dataset, read_sites, Table};
use crate::detrend::Detrend;
use crate::error::{CliError, Result};
use crate::manifest::{FileDigest, Manifest};

pub const COMMANDS: [(&str, &str); 6] = [
    ("simulate", "simulate a Matérn field on a point pattern and split it into train and test files"),
    ("fit", "estimate Matérn parameters (and mean coefficients) from a dataset"),
    ("predict", "krige at prediction sites from a fit report"),
    ("bootstrap-ci", "parametric bootstrap intervals for the fitted parameters"),
    ("crossval", "k-fold cross-validation of one or more methods"),
    ("variogram", "empirical semivariogram of a dataset"),
];

/// What a command wrote, for the console.
#[derive(Debug, Default)]
pub struct Outcome {
    pub outputs: Vec<PathBuf>,
    pub summary: String,
    pub warnings: Vec<String>,
}

pub fn run(command: &str, cfg: &RunConfig) -> Result<Outcome> {
    match command {
        "simulate" => simulate(cfg),
        "fit" => fit(cfg),
        "predict" => predict(cfg),
        "bootstrap-ci" => bootstrap(cfg),
        "crossval" => crossval(cfg),
        "variogram" => variogram(cfg),
        other => Err(CliError::Usage(format!("unknown command '{other}'"))),
    }
}

fn output_path(cfg: &RunConfig, default: &str) -> PathBuf {
    PathBuf::from(cfg.raw("output").unwrap_or(default))
}

fn seed_stream(seed: u64, k: u64) -> u64 {
    seed.wrapping_add(k.wrapping_mul(0x9e37_79b9_7f4a_7c15))
}

fn fit_config(cfg: &RunConfig) -> Result<FitConfig> {
    let likelihood: LikelihoodKind = cfg.value("method")?;
    Ok(FitConfig {
        likelihood,
        m_seq: cfg.list("m_seq")?,
        max_iter: cfg.value("max_iter")?,
        rel_tol: cfg.value("rel_tol")?,
        grad_tol: cfg.value("grad_tol")?,
        n_blocks: cfg.get("n_blocks")?,
        seed: cfg.value("seed")?,
        ..FitConfig::default()
    })
}

/// Fit output, read back by `predict` and `bootstrap-ci`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub data: FileDigest,
    /// OLS plane removed before fitting.
    pub detrend: Option<Detrend>,
    pub fit: FitResult,
    /// Mean coefficients then covariance parameters, with Wald statistics.
    pub summary: Vec<WaldRow>,
    /// Trend coefficient table (fitted mean or removed plane).
    pub trend: Vec<WaldRow>,
}

impl FitReport {
    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
        serde_json::from_slice(&bytes).map_err(|e| CliError::data(path, format!("not a fit report: {e}")))
    }

    /// Trend at a site from the removed plane and the fitted mean.
    pub fn trend_at(&self, p: [f64; 2]) -> f64 {
        let plane = self.detrend.as_ref().map_or(0.0, |d| d.at(p));
        let fitted: f64 = self.fit.mean.row(p).iter().zip(&self.fit.beta_hat).map(|(x, b)| x * b).sum();
        plane + fitted
    }
}

fn load_dataset(path: &Path, mean: MeanSpec) -> Result<(Table, Dataset)> {
    let table = read_dataset(path)?;
    let points = PointSet::new(table.coords.clone())?;
    let data = Dataset::new(points, table.values.clone(), mean)?;
    Ok((table, data))
}

fn format_table(rows: &[WaldRow]) -> String {
    let opt = |v: Option<f64>, digits: usize| v.map_or("-".to_string(), |v| format!("{v:.digits$}"));
    let mut out = format!("{:<12} {:>12} {:>12} {:>10} {:>10}\n", "term", "estimate", "std_error", "z", "p");
    for r in rows {
        let _ = writeln!(
            out,
            "{:<12} {:>12.6} {:>12} {:>10} {:>10}",
            r.name,
            r.estimate,
            opt(r.std_error, 6),
            opt(r.z, 4),
            opt(r.p_value, 4)
        );
    }
    out
}

fn simulate(cfg: &RunConfig) -> Result<Outcome> {
    let n: usize = cfg.value("n")?;
    let kind: PatternKind = cfg.value("pattern")?;
    let params = MaternParams::new(
        cfg.value("sigma_sq")?,
        cfg.value("range")?,
        cfg.value("smoothness")?,
        cfg.value("nugget")?,
    )?;
    let mean: MeanSpec = cfg.value("mean_kind")?;
    let beta: Vec<f64> = cfg.list("beta")?;
    let split: f64 = cfg.value("split")?;
    if !(split > 0.0 && split <= 1.0) {
        return Err(CliError::Usage(format!("split must lie in (0, 1], got {split}")));
    }
    let seed: u64 = cfg.value("seed")?;
    let seeds = [("pattern", seed), ("field", seed_stream(seed, 1)), ("split", seed_stream(seed, 2))];

    let points = generate_pattern(&PatternSpec { kind: kind.clone(), n, seed: seeds[0].1 })?;
    let values = simulate_gp(&points, &params, mean, &beta, seeds[1].1)?;
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seeds[2].1));
    let n_train = ((split * n as f64).round() as usize).clamp(1, n);
    let (mut train, mut test) = (order[..n_train].to_vec(), order[n_train..].to_vec());
    train.sort_unstable();
    test.sort_unstable();

    let mut manifest = Manifest::new("simulate", cfg);
    manifest.seeds.extend(seeds.iter().map(|(k, v)| (k.to_string(), *v)));
    let p = params.to_array();
    for (k, name) in spatialgp::model::PARAM_NAMES.iter().enumerate() {
        manifest.extra.insert(format!("true_{name}"), p[k].to_string());
    }
    manifest.extra.insert("pattern".into(), kind.name().into());
    manifest.extra.insert("mean_kind".into(), mean.to_string());
    manifest.extra.insert("beta".into(), beta.iter().map(f64::to_string).collect::<Vec<_>>().join(","));

    let mut outcome = Outcome::default();
    for (key, idx) in [("train_output", &train), ("test_output", &test)] {
        let path = PathBuf::from(cfg.value::<String>(key)?);
        let coords: Vec<[f64; 2]> = idx.iter().map(|&i| points.get(i)).collect();
        let vals: Vec<f64> = idx.iter().map(|&i| values[i]).collect();
        let mut m = manifest.clone();
        m.extra.insert("rows".into(), idx.len().to_string());
        m.write_with(&path, &dataset_csv(&coords, &vals))?;
        outcome.outputs.push(path);
    }
    outcome.summary = format!("{} training and {} test sites ({} pattern)\n", train.len(), test.len(), kind.name());
    Ok(outcome)
}

fn fit(cfg: &RunConfig) -> Result<Outcome> {
    let data_path = cfg.path("data")?;
    let mean: MeanSpec = cfg.value("mean_kind")?;
    let detrend: bool = cfg.value("detrend")?;
    if detrend && mean != MeanSpec::Zero {
        return Err(CliError::Usage("detrend fits the residuals with a zero mean; set mean_kind = zero".into()));
    }
    let (table, mut data) = load_dataset(data_path, mean)?;
    let n = table.values.len() as f64;
    let avg = table.values.iter().sum::<f64>() / n;
    if table.values.iter().all(|v| *v == avg) {
        return Err(CliError::data(data_path, "column 'value' has zero variance"));
    }
    let plane = if detrend {
        let d = Detrend::fit(&table.coords, &table.values)?;
        for (y, p) in data.responses.iter_mut().zip(&table.coords) {
            *y -= d.at(*p);
        }
        Some(d)
    } else {
        None
    };
    let config = fit_config(cfg)?;
    let fit = fit_model(&data, &config)?;
    let summary = wald_summary(&fit);
    let trend = match &plane {
        Some(d) => d.table(),
        None => summary[..fit.beta_hat.len()].to_vec(),
    };
    let report = FitReport { data: FileDigest::of_file(data_path)?, detrend: plane, fit, summary, trend };

    let out = output_path(cfg, "fit.json");
    let mut manifest = Manifest::new("fit", cfg);
    manifest.seeds.insert("seed".into(), config.seed);
    manifest.inputs.push(report.data.clone());
    let mut json = serde_json::to_vec_pretty(&report).expect("report serializes");
    json.push(b'\n');
    manifest.write_with(&out, &json)?;

    let mut text = format!(
        "loglik {:.6}  converged {}  iterations {}\n",
        report.fit.loglik, report.fit.converged, report.fit.iterations
    );
    text.push_str(&format_table(&report.summary[report.fit.beta_hat.len()..]));
    if !report.trend.is_empty() {
        text.push_str("\ntrend\n");
        text.push_str(&format_table(&report.trend));
    }
    let mut outcome = Outcome { outputs: vec![out], summary: text, warnings: Vec::new() };
    if !report.fit.converged {
        outcome.warnings.push("fit did not converge; estimates are the last iterate".into());
    }
    Ok(outcome)
}

fn predict(cfg: &RunConfig) -> Result<Outcome> {
    let report = FitReport::load(cfg.path("fit")?)?;
    let data_path = cfg.path("data")?;
    let sites_path = cfg.path("sites")?;
    let mut outcome = Outcome::default();
    let digest = FileDigest::of_file(data_path)?;
    if digest.sha256 != report.data.sha256 {
        outcome.warnings.push(format!("{} differs from the dataset the fit was made on ({})", digest.path, report.data.path));
    }
    let (table, mut data) = load_dataset(data_path, report.fit.mean)?;
    if let Some(d) = &report.detrend {
        for (y, p) in data.responses.iter_mut().zip(&table.coords) {
            *y -= d.at(*p);
        }
    }
    let sites = read_sites(sites_path)?;
    let config = PredictConfig {
        m_pred: cfg.value("m_pred")?,
        alpha: cfg.value("alpha")?,
        target: cfg.value::<PredictionTarget>("target")?,
        allow_unconverged: cfg.value("allow_unconverged")?,
    };
    let mut pred = if sites.is_empty() {
        PredictionSet::gaussian(Vec::new(), Vec::new(), Vec::new(), Vec::new(), config.alpha)?
    } else {
        vecchia_predict(&data, &report.fit, &sites, &config)?
    };
    if let Some(d) = &report.detrend {
        for i in 0..pred.len() {
            let t = d.at(pred.locations[i]);
            pred.mean[i] += t;
            pred.lower[i] += t;
            pred.upper[i] += t;
        }
    }

    let out = output_path(cfg, "predictions.csv");
    let mut manifest = Manifest::new("predict", cfg);
    manifest.inputs = vec![digest, FileDigest::of_file(sites_path)?, FileDigest::of_file(cfg.path("fit")?)?];
    let mut csv = Vec::new();
    pred.write_csv(&mut csv).map_err(|e| CliError::io(&out, e))?;
    manifest.write_with(&out, &csv)?;
    let flagged = pred.flags.iter().filter(|f| !f.is_clear()).count();
    outcome.summary = format!("{} sites predicted, {} flagged\n", pred.len(), flagged);
    outcome.outputs.push(out);
    Ok(outcome)
}

fn bootstrap(cfg: &RunConfig) -> Result<Outcome> {
    let report = FitReport::load(cfg.path("fit")?)?;
    let data_path = cfg.path("data")?;
    let (table, data) = load_dataset(data_path, MeanSpec::Zero)?;
    // Replicates are zero-mean; remove whatever trend the fit carried.
    let residuals: Vec<f64> = table.values.iter().zip(&table.coords).map(|(y, p)| y - report.trend_at(*p)).collect();
    let data = Dataset::new(data.points, residuals, MeanSpec::Zero)?;
    let seed: u64 = cfg.value("seed")?;
    let config = BootstrapConfig {
        n_reps: cfg.value("n_reps")?,
        subsample_size: cfg.value("subsample_size")?,
        weight_radius: cfg.get("weight_radius")?,
        fit_config: FitConfig {
            likelihood: LikelihoodKind::Vecchia,
            m_seq: cfg.list("refit_m_seq")?,
            max_iter: cfg.value("refit_max_iter")?,
            rel_tol: cfg.value("rel_tol")?,
            grad_tol: cfg.value("grad_tol")?,
            seed,
            ..FitConfig::default()
        },
        alpha: cfg.value("alpha")?,
        seed,
        ..BootstrapConfig::default()
    };
    config.validate()?;
    let result = bootstrap_ci(&data, &report.fit, &config)?;

    let out = output_path(cfg, "bootstrap_ci.csv");
    let mut manifest = Manifest::new("bootstrap-ci", cfg);
    manifest.seeds.insert("subsample".into(), seed);
    manifest.seeds.insert("replicates".into(), seed);
    manifest.inputs = vec![FileDigest::of_file(data_path)?, FileDigest::of_file(cfg.path("fit")?)?];
    manifest.extra.insert("n_failed".into(), result.n_failed.to_string());
    manifest.extra.insert("unreliable".into(), result.unreliable.to_string());
    let mut csv = Vec::new();
    result.write_csv(&mut csv).map_err(|e| CliError::io(&out, e))?;
    manifest.write_with(&out, &csv)?;

    let mut outcome = Outcome { outputs: vec![out], ..Outcome::default() };
    for (k, name) in spatialgp::model::PARAM_NAMES.iter().enumerate() {
        let iv = &result.intervals[k];
        let _ = writeln!(outcome.summary, "{name:<12} {:>12.6} [{:.6}, {:.6}]", result.estimates[k], iv.lower, iv.upper);
    }
    if result.unreliable {
        outcome.warnings.push(format!("{} of {} replicates failed; intervals are unreliable", result.n_failed, config.n_reps));
    }
    Ok(outcome)
}

fn crossval(cfg: &RunConfig) -> Result<Outcome> {
    let data_path = cfg.path("data")?;
    let (_, data) = load_dataset(data_path, cfg.value("mean_kind")?)?;
    let kinds: Vec<MethodKind> = cfg.list("method")?;
    if kinds.is_empty() {
        return Err(CliError::Usage("crossval needs at least one method".into()));
    }
    let base_fit = FitConfig { likelihood: LikelihoodKind::Vecchia, ..fit_config(&with_method(cfg, "vecchia")?)? };
    let alpha: f64 = cfg.value("alpha")?;
    let target: PredictionTarget = cfg.value("target")?;
    let methods: Vec<MethodSpec> = kinds
        .into_iter()
        .map(|kind| -> Result<MethodSpec> {
            let mut m = MethodSpec::new(kind);
            m.fit = base_fit.clone();
            m.predict = PredictConfig { m_pred: cfg.value("m_pred")?, alpha, target, allow_unconverged: true };
            m.local = LocalConfig { delta: cfg.get("delta")?, cap: cfg.value("cap")?, alpha, target, allow_unconverged: true };
            Ok(m)
        })
        .collect::<Result<_>>()?;
    let seed: u64 = cfg.value("seed")?;
    let plan = kfold_split(data.len(), cfg.value("folds")?, seed)?;
    let report = run_benchmark(&data, &methods, &plan)?;
    let timing: bool = cfg.value("timing")?;

    let out = output_path(cfg, "crossval.csv");
    let mut manifest = Manifest::new("crossval", cfg);
    manifest.seeds.insert("folds".into(), seed);
    manifest.inputs.push(FileDigest::of_file(data_path)?);
    let mut csv = Vec::new();
    report.write_csv(&mut csv, timing).map_err(|e| CliError::io(&out, e))?;
    manifest.write_with(&out, &csv)?;
    let warnings = report
        .rows
        .iter()
        .filter_map(|r| r.error.as_ref().map(|e| format!("{} fold {}: {e}", r.method, r.fold)))
        .collect();
    Ok(Outcome { outputs: vec![out], summary: report.table(timing), warnings })
}

/// `cfg` with `method` replaced, for reusing the fit keys.
fn with_method(cfg: &RunConfig, method: &str) -> Result<RunConfig> {
    let mut c = cfg.clone();
    c.set("method", method)?;
    Ok(c)
}

fn variogram(cfg: &RunConfig) -> Result<Outcome> {
    let data_path = cfg.path("data")?;
    let (_, data) = load_dataset(data_path, MeanSpec::Zero)?;
    let seed: u64 = cfg.value("seed")?;
    let config =
        VariogramConfig { n_bins: cfg.value("n_bins")?, max_dist: cfg.get("max_dist")?, max_pairs: cfg.value("max_pairs")?, seed };
    let v = empirical_variogram(&data, &config)?;

    let out = output_path(cfg, "variogram.csv");
    let mut manifest = Manifest::new("variogram", cfg);
    manifest.seeds.insert("pairs".into(), seed);
    manifest.inputs.push(FileDigest::of_file(data_path)?);
    let mut csv = String::from("bin_center,semivariance,count\n");
    for i in 0..v.bin_centers.len() {
        let _ = writeln!(csv, "{},{},{}", v.bin_centers[i], v.semivariance[i], v.counts[i]);
    }
    manifest.write_with(&out, csv.as_bytes())?;
    Ok(Outcome { outputs: vec![out], summary: format!("{} bins\n", v.bin_centers.len()), warnings: Vec::new() })
}
