//! Parametric bootstrap intervals for the Matérn parameters: simulate at a
//! de-clustered subsample, refit, and smooth each parameter's replicate
//! distribution with a skew-normal.

mod interval;

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use interval::{empirical_quantile, sn_interval, sn_interval_with_shape, SnInterval, MIN_INTERVAL_SAMPLES};

use crate::error::{Error, Result};
use crate::fit::{fit_model, FitConfig, FitResult};
use crate::geo::{decluster_weights, default_decluster_radius, weighted_subsample, PointSet};
use crate::model::{Dataset, MaternParams, MeanSpec, PARAM_NAMES};
use crate::simulate::{GpSampler, DEFAULT_SIMULATION_MAX_N};

pub const MIN_REPS: usize = 50;
/// Failure share above which a result is flagged unreliable.
pub const MAX_FAILED_SHARE: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapConfig {
    pub n_reps: usize,
    /// Capped at the number of sites.
    pub subsample_size: usize,
    /// De-clustering radius; defaults to 5% of the bounding-box diagonal.
    pub weight_radius: Option<f64>,
    /// Refit settings; the start is always the master estimate.
    pub fit_config: FitConfig,
    pub alpha: f64,
    pub seed: u64,
    /// Draw a fresh subsample for every replicate (one factorization each).
    pub resample_per_replicate: bool,
    /// Largest subsample simulated by dense factorization.
    pub max_dense: usize,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        Self {
            n_reps: 1000,
            subsample_size: 10_000,
            weight_radius: None,
            fit_config: FitConfig { m_seq: vec![10, 30], max_iter: 50, ..FitConfig::default() },
            alpha: 0.05,
            seed: 0,
            resample_per_replicate: false,
            max_dense: DEFAULT_SIMULATION_MAX_N,
        }
    }
}

impl BootstrapConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_reps < MIN_REPS {
            return Err(Error::InvalidArgument(format!("n_reps must be at least {MIN_REPS}, got {}", self.n_reps)));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidArgument(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        if self.subsample_size == 0 {
            return Err(Error::InvalidArgument("subsample_size must be positive".into()));
        }
        if let Some(r) = self.weight_radius {
            if !(r > 0.0 && r.is_finite()) {
                return Err(Error::InvalidArgument(format!("weight_radius must be positive, got {r}")));
            }
        }
        self.fit_config.validate()
    }
}

/// Re-estimation inside a replicate.
pub trait Refit: Sync {
    fn refit(&self, data: &Dataset, start: &MaternParams) -> Result<MaternParams>;
}

impl Refit for FitConfig {
    fn refit(&self, data: &Dataset, start: &MaternParams) -> Result<MaternParams> {
        let config = FitConfig { init: Some(*start), ..self.clone() };
        Ok(fit_model(data, &config)?.params)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapResult {
    /// Master-fit estimates the replicates were simulated from.
    pub estimates: [f64; 4],
    /// Successful replicates in replicate order.
    pub replicate_estimates: Vec<[f64; 4]>,
    pub intervals: [SnInterval; 4],
    pub n_failed: usize,
    /// More than 10% of replicates failed.
    pub unreliable: bool,
    /// Site indices of the shared subsample (empty when resampling per
    /// replicate).
    pub subsample: Vec<usize>,
}

impl BootstrapResult {
    /// CSV with columns `parameter, estimate, sn_location, sn_scale,
    /// sn_shape, lower, upper, n_failed`. Missing fits leave the three
    /// skew-normal columns empty.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "parameter,estimate,sn_location,sn_scale,sn_shape,lower,upper,n_failed")?;
        for k in 0..4 {
            let iv = &self.intervals[k];
            let sn = match &iv.fit {
                Some(f) => format!("{},{},{}", f.location, f.scale, f.shape),
                None => ",,".to_string(),
            };
            writeln!(w, "{},{},{},{},{},{}", PARAM_NAMES[k], self.estimates[k], sn, iv.lower, iv.upper, self.n_failed)?;
        }
        Ok(())
    }
}

fn subsample(points: &PointSet, config: &BootstrapConfig, seed: u64) -> Result<Vec<usize>> {
    let radius = config.weight_radius.unwrap_or_else(|| default_decluster_radius(points));
    let weights = decluster_weights(points, radius)?;
    weighted_subsample(&weights, config.subsample_size.min(points.len()), seed)
}

/// Bootstrap intervals with the refit described by `config.fit_config`.
pub fn bootstrap_ci(data: &Dataset, fit: &FitResult, config: &BootstrapConfig) -> Result<BootstrapResult> {
    bootstrap_ci_with(data, &fit.params, config, &config.fit_config)
}

/// Bootstrap intervals around `params` with a caller-supplied refit.
pub fn bootstrap_ci_with(
    data: &Dataset,
    params: &MaternParams,
    config: &BootstrapConfig,
    refit: &dyn Refit,
) -> Result<BootstrapResult> {
    config.validate()?;
    params.validate()?;
    let size = config.subsample_size.min(data.len());
    if size > config.max_dense {
        return Err(Error::SizeGuard { what: "bootstrap subsample", size, limit: config.max_dense });
    }
    let shared = if config.resample_per_replicate {
        None
    } else {
        let idx = subsample(&data.points, config, config.seed)?;
        let pts = data.points.subset(&idx)?;
        let sampler = GpSampler::with_guard(&pts, params, MeanSpec::Zero, &[], config.max_dense)?;
        Some((idx, pts, sampler))
    };

    let outcomes: Vec<Result<MaternParams>> = (0..config.n_reps)
        .into_par_iter()
        .map(|r| {
            let draw_seed = config.seed ^ 0x9e37_79b9_7f4a_7c15;
            let (pts, y) = match &shared {
                Some((_, pts, sampler)) => (pts.clone(), sampler.draw_stream(draw_seed, r as u64)),
                None => {
                    let idx = subsample(&data.points, config, config.seed.wrapping_add(r as u64 + 1))?;
                    let pts = data.points.subset(&idx)?;
                    let sampler = GpSampler::with_guard(&pts, params, MeanSpec::Zero, &[], config.max_dense)?;
                    let y = sampler.draw_stream(draw_seed, r as u64);
                    (pts, y)
                }
            };
            let replicate = Dataset::new(pts, y, MeanSpec::Zero)?;
            refit.refit(&replicate, params)
        })
        .collect();

    let replicate_estimates: Vec<[f64; 4]> =
        outcomes.iter().filter_map(|o| o.as_ref().ok()).map(|p| p.to_array()).collect();
    let n_failed = config.n_reps - replicate_estimates.len();
    if replicate_estimates.len() < MIN_INTERVAL_SAMPLES {
        return Err(Error::DegenerateSample(format!(
            "only {} of {} replicates succeeded",
            replicate_estimates.len(),
            config.n_reps
        )));
    }
    let mut intervals = Vec::with_capacity(4);
    for k in 0..4 {
        let column: Vec<f64> = replicate_estimates.iter().map(|e| e[k]).collect();
        intervals.push(sn_interval(&column, config.alpha)?);
    }
    Ok(BootstrapResult {
        estimates: params.to_array(),
        replicate_estimates,
        intervals: intervals.try_into().expect("four parameters"),
        n_failed,
        unreliable: n_failed as f64 > MAX_FAILED_SHARE * config.n_reps as f64,
        subsample: shared.map(|s| s.0).unwrap_or_default(),
    })
}
