use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::krige::Kriger;
use super::{check_fit, FittedModel, PredictionTarget, DEFAULT_M_PRED};
use crate::error::{Error, Result};
use crate::fit::FitResult;
use crate::geo::{maxmin_order, neighbor_sets, KdTree, PointSet};
use crate::model::Dataset;
use crate::numerics::dense::dot;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CondSimConfig {
    pub n_sims: usize,
    /// Observed neighbors per site, and also the cap on previously
    /// simulated neighbors.
    pub m_pred: usize,
    pub seed: u64,
    pub target: PredictionTarget,
    pub allow_unconverged: bool,
}

impl Default for CondSimConfig {
    fn default() -> Self {
        Self { n_sims: 1000, m_pred: DEFAULT_M_PRED, seed: 0, target: PredictionTarget::Response, allow_unconverged: false }
    }
}

/// `draws[s][j]` is simulation `s` at prediction site `j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CondSimDraws {
    pub n_sims: usize,
    pub draws: Vec<Vec<f64>>,
    pub seed: u64,
}

impl CondSimDraws {
    pub fn site_mean(&self, j: usize) -> f64 {
        self.draws.iter().map(|d| d[j]).sum::<f64>() / self.n_sims as f64
    }

    /// Sample variance with divisor `n_sims − 1`.
    pub fn site_variance(&self, j: usize) -> f64 {
        let m = self.site_mean(j);
        self.draws.iter().map(|d| (d[j] - m).powi(2)).sum::<f64>() / (self.n_sims - 1) as f64
    }
}

/// One step of the sequential sampler: the conditional mean is
/// `base + Σ w_k (value at prev_k − trend)`.
struct Step {
    site: usize,
    base: f64,
    prev: Vec<usize>,
    prev_weights: Vec<f64>,
    sd: f64,
}

/// Sequential Gaussian simulation over the max-min ordering of `pred`.
pub fn cond_sim(data: &Dataset, fit: &FitResult, pred: &[[f64; 2]], config: &CondSimConfig) -> Result<CondSimDraws> {
    check_fit(fit, config.allow_unconverged)?;
    cond_sim_with_model(data, &FittedModel::from_fit(fit)?, pred, config)
}

pub fn cond_sim_with_model(
    data: &Dataset,
    model: &FittedModel,
    pred: &[[f64; 2]],
    config: &CondSimConfig,
) -> Result<CondSimDraws> {
    if config.n_sims < 2 {
        return Err(Error::InvalidArgument(format!("n_sims must be at least 2, got {}", config.n_sims)));
    }
    if config.m_pred == 0 {
        return Err(Error::InvalidArgument("m_pred must be at least 1".into()));
    }
    model.check_data(data)?;
    if pred.is_empty() {
        return Ok(CondSimDraws { n_sims: config.n_sims, draws: vec![Vec::new(); config.n_sims], seed: config.seed });
    }
    let sites = PointSet::new(pred.to_vec())?;
    let order = maxmin_order(&sites);
    let plan = neighbor_sets(&sites, &order, config.m_pred)?;
    let m_obs = config.m_pred.min(data.len());
    let k = m_obs + config.m_pred;
    let kriger = Kriger::new(&model.params, config.target, pred.len() * k * (k + 1) / 2)?;
    let tree = KdTree::new(&data.points);
    let trend_pred: Vec<f64> = pred.iter().map(|&p| model.trend(p)).collect();
    let simulated_noisy = config.target == PredictionTarget::Response;

    let steps: Vec<Step> = (0..pred.len())
        .into_par_iter()
        .map(|t| {
            let site = order[t];
            let s = pred[site];
            let obs: Vec<usize> = tree.nearest(s, m_obs).iter().map(|n| n.index).collect();
            let prev: Vec<usize> = plan.neighbors(t).iter().map(|&q| order[q]).collect();
            let mut coords: Vec<[f64; 2]> = obs.iter().map(|&j| data.points.get(j)).collect();
            coords.extend(prev.iter().map(|&j| pred[j]));
            let mut noisy = vec![true; obs.len()];
            noisy.resize(coords.len(), simulated_noisy);
            let sol = kriger.solve(s, &coords, &noisy)?;
            let centered: Vec<f64> =
                obs.iter().map(|&j| data.responses[j] - model.trend(data.points.get(j))).collect();
            let base = trend_pred[site] + dot(&sol.weights[..obs.len()], &centered);
            Ok(Step { site, base, prev, prev_weights: sol.weights[obs.len()..].to_vec(), sd: sol.variance.sqrt() })
        })
        .collect::<Result<_>>()?;

    let draws: Vec<Vec<f64>> = (0..config.n_sims)
        .into_par_iter()
        .map(|sim| {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            rng.set_stream(sim as u64);
            let mut values = vec![0.0; pred.len()];
            for step in &steps {
                let cond: f64 = step
                    .prev
                    .iter()
                    .zip(&step.prev_weights)
                    .map(|(&j, w)| w * (values[j] - trend_pred[j]))
                    .sum();
                let z: f64 = rng.sample(StandardNormal);
                values[step.site] = step.base + cond + step.sd * z;
            }
            values
        })
        .collect();
    Ok(CondSimDraws { n_sims: config.n_sims, draws, seed: config.seed })
}
