use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::krige::Kriger;
use super::{check_alpha, check_fit, krige_site, FittedModel, PredictionSet, PredictionTarget, SiteFlags};
use crate::error::{Error, Result};
use crate::fit::FitResult;
use crate::geo::{KdTree, Neighbor};
use crate::model::Dataset;

/// Neighborhood size cap.
pub const DEFAULT_CAP: usize = 500;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalConfig {
    /// Half-width of the square neighborhood; see [`resolve_delta`].
    pub delta: Option<f64>,
    pub cap: usize,
    pub alpha: f64,
    pub target: PredictionTarget,
    pub allow_unconverged: bool,
}

impl Default for LocalConfig {
    fn default() -> Self {
        Self { delta: None, cap: DEFAULT_CAP, alpha: 0.05, target: PredictionTarget::Response, allow_unconverged: false }
    }
}

/// Explicit Δ, else four fitted ranges (where Matérn correlation is small),
/// else 5% of the data's bounding-box diagonal.
pub fn resolve_delta(config: &LocalConfig, fit: Option<&FitResult>, data: &Dataset) -> Result<f64> {
    let delta = match (config.delta, fit) {
        (Some(d), _) => d,
        (None, Some(f)) => 4.0 * f.params.range,
        (None, None) => 0.05 * data.points.diagonal(),
    };
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::InvalidArgument(format!("neighborhood half-width must be positive, got {delta}")));
    }
    Ok(delta)
}

fn check(config: &LocalConfig) -> Result<()> {
    if config.cap < 2 {
        return Err(Error::InvalidArgument(format!("cap must be at least 2, got {}", config.cap)));
    }
    check_alpha(config.alpha)
}

/// Observations in the square of half-width `delta` around `site`, the
/// `cap` nearest kept, ordered by (distance, index).
pub(crate) fn square_neighborhood(tree: &KdTree, data: &Dataset, site: [f64; 2], delta: f64, cap: usize) -> Vec<usize> {
    let mut found = Vec::new();
    tree.for_each_within(site, 2.0 * delta * delta, |i, d2| {
        let p = data.points.get(i);
        if (p[0] - site[0]).abs() <= delta && (p[1] - site[1]).abs() <= delta {
            found.push(Neighbor { index: i, dist2: d2 });
        }
    });
    found.sort_unstable();
    found.truncate(cap);
    found.into_iter().map(|n| n.index).collect()
}

fn mean_sd(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = values.clone().count() as f64;
    let mean = values.clone().sum::<f64>() / n;
    let var = values.map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Sample mean and standard deviation of the responses in each
/// neighborhood. Sites with fewer than two neighbors use the global values
/// and are flagged.
pub fn local_gaussian_predict(
    data: &Dataset,
    pred: &[[f64; 2]],
    delta: f64,
    config: &LocalConfig,
) -> Result<PredictionSet> {
    check(config)?;
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::InvalidArgument(format!("neighborhood half-width must be positive, got {delta}")));
    }
    let tree = KdTree::new(&data.points);
    let global = if data.len() >= 2 { mean_sd(data.responses.iter().copied()) } else { (data.responses[0], 0.0) };
    let sites: Vec<(f64, f64, SiteFlags)> = pred
        .par_iter()
        .map(|&s| {
            let nb = square_neighborhood(&tree, data, s, delta, config.cap);
            if nb.len() < 2 {
                return (global.0, global.1, SiteFlags(SiteFlags::FALLBACK));
            }
            let (m, sd) = mean_sd(nb.iter().map(|&j| data.responses[j]));
            (m, sd, SiteFlags::default())
        })
        .collect();
    let (mean, sd): (Vec<f64>, Vec<f64>) = sites.iter().map(|s| (s.0, s.1)).unzip();
    PredictionSet::gaussian(pred.to_vec(), mean, sd, sites.iter().map(|s| s.2).collect(), config.alpha)
}

/// Kriging restricted to the square neighborhood. Empty neighborhoods fall
/// back to the trend with the prior standard deviation, flagged.
pub fn local_krige_predict(
    data: &Dataset,
    fit: &FitResult,
    pred: &[[f64; 2]],
    delta: f64,
    config: &LocalConfig,
) -> Result<PredictionSet> {
    check_fit(fit, config.allow_unconverged)?;
    local_krige_with_model(data, &FittedModel::from_fit(fit)?, pred, delta, config)
}

pub fn local_krige_with_model(
    data: &Dataset,
    model: &FittedModel,
    pred: &[[f64; 2]],
    delta: f64,
    config: &LocalConfig,
) -> Result<PredictionSet> {
    check(config)?;
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::InvalidArgument(format!("neighborhood half-width must be positive, got {delta}")));
    }
    model.check_data(data)?;
    let m = config.cap.min(data.len());
    let kriger = Kriger::new(&model.params, config.target, pred.len() * m * (m + 1) / 2)?;
    let prior_sd = kriger.prior_variance().sqrt();
    let tree = KdTree::new(&data.points);
    let sites: Vec<(f64, f64, SiteFlags)> = pred
        .par_iter()
        .map(|&s| {
            let nb = square_neighborhood(&tree, data, s, delta, config.cap);
            if nb.is_empty() {
                return Ok((model.trend(s), prior_sd, SiteFlags(SiteFlags::FALLBACK)));
            }
            krige_site(&kriger, model, data, s, &nb)
        })
        .collect::<Result<_>>()?;
    let (mean, sd): (Vec<f64>, Vec<f64>) = sites.iter().map(|s| (s.0, s.1)).unzip();
    PredictionSet::gaussian(pred.to_vec(), mean, sd, sites.iter().map(|s| s.2).collect(), config.alpha)
}
