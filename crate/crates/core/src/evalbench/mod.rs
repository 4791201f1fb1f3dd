//! k-fold cross-validation: fit on the training folds, predict the held-out
//! fold, score, and collect a per-method report.

use std::fmt;
use std::io::Write;
use std::str::FromStr;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fit::{fit_model, FitConfig, LikelihoodKind};
use crate::model::Dataset;
use crate::predict::{
    local_gaussian_predict, local_krige_predict, resolve_delta, vecchia_predict, LocalConfig, PredictConfig,
    PredictionSet,
};

pub const DEFAULT_FOLDS: usize = 3;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CvPlan {
    pub k: usize,
    pub seed: u64,
    /// Fold of each observation.
    pub assignment: Vec<usize>,
}

impl CvPlan {
    /// Held-out indices of `fold`, ascending.
    pub fn test_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.assignment.len()).filter(|&i| self.assignment[i] == fold).collect()
    }

    pub fn train_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.assignment.len()).filter(|&i| self.assignment[i] != fold).collect()
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &f in &self.assignment {
            sizes[f] += 1;
        }
        sizes
    }
}

/// Seeded random permutation cut into `k` folds whose sizes differ by at
/// most one.
pub fn kfold_split(n: usize, k: usize, seed: u64) -> Result<CvPlan> {
    if k < 2 || k > n {
        return Err(Error::InvalidArgument(format!("fold count must lie in [2, {n}], got {k}")));
    }
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut assignment = vec![0; n];
    for (pos, &i) in perm.iter().enumerate() {
        assignment[i] = pos % k;
    }
    Ok(CvPlan { k, seed, assignment })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scores {
    pub mspe: f64,
    /// Mean absolute prediction error.
    pub mape: f64,
    pub picp: f64,
    pub mpiw: f64,
    pub wall_time_s: f64,
}

pub fn score(pred: &PredictionSet, truth: &[f64], wall_time_s: f64) -> Result<Scores> {
    if pred.len() != truth.len() {
        return Err(Error::DimensionMismatch { expected: pred.len(), actual: truth.len() });
    }
    if truth.is_empty() {
        return Err(Error::InvalidArgument("nothing to score".into()));
    }
    let n = truth.len() as f64;
    let (mut se, mut ae, mut hit, mut width) = (0.0, 0.0, 0usize, 0.0);
    for (i, &y) in truth.iter().enumerate() {
        let e = pred.mean[i] - y;
        se += e * e;
        ae += e.abs();
        if pred.lower[i] <= y && y <= pred.upper[i] {
            hit += 1;
        }
        width += pred.upper[i] - pred.lower[i];
    }
    Ok(Scores { mspe: se / n, mape: ae / n, picp: hit as f64 / n, mpiw: width / n, wall_time_s })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodKind {
    Exact,
    Vecchia,
    Bcl,
    LocalKrige,
    LocalGaussian,
}

impl MethodKind {
    pub const ALL: [MethodKind; 5] =
        [MethodKind::Exact, MethodKind::Vecchia, MethodKind::Bcl, MethodKind::LocalKrige, MethodKind::LocalGaussian];

    pub fn name(self) -> &'static str {
        match self {
            MethodKind::Exact => "exact",
            MethodKind::Vecchia => "vecchia",
            MethodKind::Bcl => "bcl",
            MethodKind::LocalKrige => "local_krige",
            MethodKind::LocalGaussian => "local_gaussian",
        }
    }
}

impl fmt::Display for MethodKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MethodKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        MethodKind::ALL.into_iter().find(|m| m.name() == s).ok_or_else(|| {
            let valid: Vec<&str> = MethodKind::ALL.iter().map(|m| m.name()).collect();
            Error::InvalidArgument(format!("unknown method '{s}'; valid methods: {}", valid.join(", ")))
        })
    }
}

/// One benchmarked method. `fit.likelihood` is overridden by `kind` for the
/// model-based methods; `local_krige` fits with the Vecchia likelihood.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSpec {
    pub label: String,
    pub kind: MethodKind,
    pub fit: FitConfig,
    pub predict: PredictConfig,
    pub local: LocalConfig,
}

impl MethodSpec {
    pub fn new(kind: MethodKind) -> Self {
        Self {
            label: kind.name().to_string(),
            kind,
            fit: FitConfig::default(),
            predict: PredictConfig { allow_unconverged: true, ..PredictConfig::default() },
            local: LocalConfig { allow_unconverged: true, ..LocalConfig::default() },
        }
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    fn run(&self, train: &Dataset, sites: &[[f64; 2]]) -> Result<PredictionSet> {
        let fit_with = |likelihood| fit_model(train, &FitConfig { likelihood, ..self.fit.clone() });
        match self.kind {
            MethodKind::Exact => {
                let fit = fit_with(LikelihoodKind::Exact)?;
                let cfg = PredictConfig { m_pred: train.len(), ..self.predict.clone() };
                vecchia_predict(train, &fit, sites, &cfg)
            }
            MethodKind::Vecchia => vecchia_predict(train, &fit_with(LikelihoodKind::Vecchia)?, sites, &self.predict),
            MethodKind::Bcl => vecchia_predict(train, &fit_with(LikelihoodKind::Bcl)?, sites, &self.predict),
            MethodKind::LocalKrige => {
                let fit = fit_with(LikelihoodKind::Vecchia)?;
                let delta = resolve_delta(&self.local, Some(&fit), train)?;
                local_krige_predict(train, &fit, sites, delta, &self.local)
            }
            MethodKind::LocalGaussian => {
                let delta = resolve_delta(&self.local, None, train)?;
                local_gaussian_predict(train, sites, delta, &self.local)
            }
        }
    }
}

/// One (method, fold) cell; `scores` is `None` when the method failed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub method: String,
    pub fold: usize,
    pub scores: Option<Scores>,
    pub error: Option<String>,
}

/// Fold means over the successful folds of one method.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: String,
    pub folds_ok: usize,
    pub mean: Option<Scores>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub plan: CvPlan,
    pub rows: Vec<FoldResult>,
    pub summary: Vec<MethodSummary>,
}

impl BenchmarkReport {
    /// Per-fold rows, then one `mean` row per method. Failed cells keep
    /// their row with empty metrics. With `timing` off, `time_s` is left
    /// empty so that reruns are byte-identical.
    pub fn write_csv<W: Write>(&self, mut w: W, timing: bool) -> std::io::Result<()> {
        writeln!(w, "method,fold,mspe,mape,picp,mpiw,time_s")?;
        let cells = |s: &Option<Scores>| match s {
            Some(s) if timing => format!("{},{},{},{},{}", s.mspe, s.mape, s.picp, s.mpiw, s.wall_time_s),
            Some(s) => format!("{},{},{},{},", s.mspe, s.mape, s.picp, s.mpiw),
            None => ",,,,".to_string(),
        };
        for r in &self.rows {
            writeln!(w, "{},{},{}", r.method, r.fold, cells(&r.scores))?;
        }
        for s in &self.summary {
            writeln!(w, "{},mean,{}", s.method, cells(&s.mean))?;
        }
        Ok(())
    }

    /// Aligned plain-text table of the per-method means.
    pub fn table(&self, timing: bool) -> String {
        let header = ["method", "folds", "mspe", "mape", "picp", "mpiw", "time_s"];
        let mut rows = vec![header.iter().map(|s| s.to_string()).collect::<Vec<_>>()];
        for s in &self.summary {
            let mut row = vec![s.method.clone(), format!("{}/{}", s.folds_ok, self.plan.k)];
            match &s.mean {
                Some(m) => {
                    row.extend([m.mspe, m.mape, m.picp, m.mpiw].map(|v| format!("{v:.4}")));
                    row.push(if timing { format!("{:.2}", m.wall_time_s) } else { "-".into() });
                }
                None => row.extend(std::iter::repeat_n("-".to_string(), 5)),
            }
            rows.push(row);
        }
        let widths: Vec<usize> = (0..header.len()).map(|c| rows.iter().map(|r| r[c].len()).max().unwrap()).collect();
        let mut out = String::new();
        for row in &rows {
            let cells: Vec<String> = row
                .iter()
                .enumerate()
                .map(|(c, v)| if c == 0 { format!("{v:<w$}", w = widths[c]) } else { format!("{v:>w$}", w = widths[c]) })
                .collect();
            out.push_str(cells.join("  ").trim_end());
            out.push('\n');
        }
        out
    }
}

fn mean_scores(scores: &[Scores]) -> Scores {
    let n = scores.len() as f64;
    let avg = |f: fn(&Scores) -> f64| scores.iter().map(f).sum::<f64>() / n;
    Scores {
        mspe: avg(|s| s.mspe),
        mape: avg(|s| s.mape),
        picp: avg(|s| s.picp),
        mpiw: avg(|s| s.mpiw),
        wall_time_s: avg(|s| s.wall_time_s),
    }
}

/// Runs every method on every fold. Cells run one after another so that
/// wall times are not distorted; each fit and prediction parallelizes
/// internally.
pub fn run_benchmark(data: &Dataset, methods: &[MethodSpec], plan: &CvPlan) -> Result<BenchmarkReport> {
    if methods.is_empty() {
        return Err(Error::InvalidArgument("at least one method is required".into()));
    }
    if plan.assignment.len() != data.len() {
        return Err(Error::DimensionMismatch { expected: data.len(), actual: plan.assignment.len() });
    }
    let mut rows = Vec::with_capacity(methods.len() * plan.k);
    let mut summary = Vec::with_capacity(methods.len());
    for method in methods {
        let mut ok = Vec::new();
        for fold in 0..plan.k {
            let train = data.subset(&plan.train_indices(fold))?;
            let test_idx = plan.test_indices(fold);
            let sites: Vec<[f64; 2]> = test_idx.iter().map(|&i| data.points.get(i)).collect();
            let truth: Vec<f64> = test_idx.iter().map(|&i| data.responses[i]).collect();
            let start = Instant::now();
            let outcome = method.run(&train, &sites).and_then(|p| score(&p, &truth, start.elapsed().as_secs_f64()));
            let (scores, error) = match outcome {
                Ok(s) => {
                    ok.push(s);
                    (Some(s), None)
                }
                Err(e) => (None, Some(e.to_string())),
            };
            rows.push(FoldResult { method: method.label.clone(), fold, scores, error });
        }
        let mean = (!ok.is_empty()).then(|| mean_scores(&ok));
        summary.push(MethodSummary { method: method.label.clone(), folds_ok: ok.len(), mean });
    }
    Ok(BenchmarkReport { plan: plan.clone(), rows, summary })
}

#[cfg(test)]
mod tests;
