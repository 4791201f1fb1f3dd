//! Kriging from nearest neighbors, sequential conditional simulation, and
//! square-neighborhood local predictors.

mod condsim;
mod krige;
mod local;

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use condsim::{cond_sim, cond_sim_with_model, CondSimConfig, CondSimDraws};
pub use krige::PredictionTarget;
pub use local::{
    local_gaussian_predict, local_krige_predict, local_krige_with_model, resolve_delta, LocalConfig, DEFAULT_CAP,
};

use crate::error::{Error, Result};
use crate::fit::FitResult;
use crate::geo::KdTree;
use crate::model::{Dataset, MaternParams, MeanSpec};
use crate::numerics::dense::dot;
use crate::numerics::normal_quantile;
use krige::{Kriger, SiteSolution};

pub const DEFAULT_M_PRED: usize = 200;

/// Per-site condition bits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SiteFlags(pub u8);

impl SiteFlags {
    /// Too few neighbors; a global fallback was used.
    pub const FALLBACK: u8 = 1;
    /// A negative round-off variance was set to zero.
    pub const CLAMPED: u8 = 2;
    /// The neighbor covariance needed extra diagonal jitter.
    pub const JITTERED: u8 = 4;

    pub fn contains(self, bit: u8) -> bool {
        self.0 & bit != 0
    }

    pub fn is_clear(self) -> bool {
        self.0 == 0
    }

    fn from_solution(s: &SiteSolution) -> Self {
        let mut bits = 0;
        if s.clamped {
            bits |= Self::CLAMPED;
        }
        if s.jittered {
            bits |= Self::JITTERED;
        }
        Self(bits)
    }
}

impl std::fmt::Display for SiteFlags {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.is_clear() {
            return f.write_str("ok");
        }
        let names: Vec<&str> = [(Self::FALLBACK, "fallback"), (Self::CLAMPED, "clamped"), (Self::JITTERED, "jittered")]
            .iter()
            .filter(|(bit, _)| self.contains(*bit))
            .map(|(_, name)| *name)
            .collect();
        f.write_str(&names.join("|"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionSet {
    pub locations: Vec<[f64; 2]>,
    pub mean: Vec<f64>,
    pub sd: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub alpha: f64,
    pub flags: Vec<SiteFlags>,
}

impl PredictionSet {
    /// Gaussian intervals `mean ± z_{1−α/2} sd`.
    pub fn gaussian(
        locations: Vec<[f64; 2]>,
        mean: Vec<f64>,
        sd: Vec<f64>,
        flags: Vec<SiteFlags>,
        alpha: f64,
    ) -> Result<Self> {
        check_alpha(alpha)?;
        let z = normal_quantile(1.0 - alpha / 2.0);
        let lower = mean.iter().zip(&sd).map(|(m, s)| m - z * s).collect();
        let upper = mean.iter().zip(&sd).map(|(m, s)| m + z * s).collect();
        Ok(Self { locations, mean, sd, lower, upper, alpha, flags })
    }

    pub fn len(&self) -> usize {
        self.mean.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mean.is_empty()
    }

    /// CSV with columns `x, y, mean, sd, lower, upper, flag`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "x,y,mean,sd,lower,upper,flag")?;
        for i in 0..self.len() {
            let p = self.locations[i];
            writeln!(
                w,
                "{},{},{},{},{},{},{}",
                p[0], p[1], self.mean[i], self.sd[i], self.lower[i], self.upper[i], self.flags[i]
            )?;
        }
        Ok(())
    }
}

pub(crate) fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidArgument(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictConfig {
    pub m_pred: usize,
    pub alpha: f64,
    pub target: PredictionTarget,
    /// Predict from a fit that did not report convergence.
    pub allow_unconverged: bool,
}

impl Default for PredictConfig {
    fn default() -> Self {
        Self { m_pred: DEFAULT_M_PRED, alpha: 0.05, target: PredictionTarget::Response, allow_unconverged: false }
    }
}

/// Fitted model pieces needed for prediction.
#[derive(Debug, Clone, PartialEq)]
pub struct FittedModel {
    pub params: MaternParams,
    pub mean: MeanSpec,
    pub beta: Vec<f64>,
}

impl FittedModel {
    pub fn new(params: MaternParams, mean: MeanSpec, beta: Vec<f64>) -> Result<Self> {
        params.validate()?;
        if beta.len() != mean.n_cols() {
            return Err(Error::DimensionMismatch { expected: mean.n_cols(), actual: beta.len() });
        }
        Ok(Self { params, mean, beta })
    }

    pub fn from_fit(fit: &FitResult) -> Result<Self> {
        Self::new(fit.params, fit.mean, fit.beta_hat.clone())
    }

    pub fn trend(&self, p: [f64; 2]) -> f64 {
        dot(&self.mean.row(p), &self.beta)
    }

    fn check_data(&self, data: &Dataset) -> Result<()> {
        if data.mean != self.mean {
            return Err(Error::InvalidArgument(format!(
                "data mean structure '{}' differs from the fitted '{}'",
                data.mean, self.mean
            )));
        }
        Ok(())
    }
}

pub(crate) fn check_fit(fit: &FitResult, allow_unconverged: bool) -> Result<()> {
    if !fit.converged && !allow_unconverged {
        return Err(Error::InvalidArgument("fit did not converge; set allow_unconverged to predict anyway".into()));
    }
    Ok(())
}

/// Kriging at `site` from the given observed neighbors (ordered).
pub(crate) fn krige_site(
    kriger: &Kriger,
    model: &FittedModel,
    data: &Dataset,
    site: [f64; 2],
    neighbors: &[usize],
) -> Result<(f64, f64, SiteFlags)> {
    let coords: Vec<[f64; 2]> = neighbors.iter().map(|&j| data.points.get(j)).collect();
    let noisy = vec![true; coords.len()];
    let sol = kriger.solve(site, &coords, &noisy)?;
    let centered: Vec<f64> = neighbors.iter().map(|&j| data.responses[j] - model.trend(data.points.get(j))).collect();
    Ok((model.trend(site) + sol.mean_offset(&centered), sol.variance.sqrt(), SiteFlags::from_solution(&sol)))
}

/// Independent kriging at each site from its `m_pred` nearest observations.
pub fn vecchia_predict(data: &Dataset, fit: &FitResult, pred: &[[f64; 2]], config: &PredictConfig) -> Result<PredictionSet> {
    check_fit(fit, config.allow_unconverged)?;
    predict_with_model(data, &FittedModel::from_fit(fit)?, pred, config)
}

/// [`vecchia_predict`] with explicitly supplied parameters.
pub fn predict_with_model(
    data: &Dataset,
    model: &FittedModel,
    pred: &[[f64; 2]],
    config: &PredictConfig,
) -> Result<PredictionSet> {
    if config.m_pred == 0 {
        return Err(Error::InvalidArgument("m_pred must be at least 1".into()));
    }
    check_alpha(config.alpha)?;
    model.check_data(data)?;
    let m = config.m_pred.min(data.len());
    let kriger = Kriger::new(&model.params, config.target, pred.len() * m * (m + 1) / 2)?;
    let tree = KdTree::new(&data.points);
    let sites: Vec<(f64, f64, SiteFlags)> = pred
        .par_iter()
        .map(|&s| {
            let nb: Vec<usize> = tree.nearest(s, m).iter().map(|n| n.index).collect();
            krige_site(&kriger, model, data, s, &nb)
        })
        .collect::<Result<_>>()?;
    let (mean, sd): (Vec<f64>, Vec<f64>) = sites.iter().map(|s| (s.0, s.1)).unzip();
    let flags = sites.iter().map(|s| s.2).collect();
    PredictionSet::gaussian(pred.to_vec(), mean, sd, flags, config.alpha)
}
