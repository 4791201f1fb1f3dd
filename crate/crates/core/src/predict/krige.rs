use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geo::dist;
use crate::model::{MaternKernel, MaternParams};
use crate::numerics::dense::{back_substitute_transposed, cholesky_in_place, dot, forward_substitute};

const MAX_JITTERS: u32 = 3;

/// What a predictive distribution describes: a new noisy observation
/// `Y(s*)` (variance includes τ²) or the noise-free field `W(s*)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PredictionTarget {
    #[default]
    Response,
    Latent,
}

impl std::str::FromStr for PredictionTarget {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "response" => Ok(Self::Response),
            "latent" => Ok(Self::Latent),
            other => Err(Error::InvalidArgument(format!("unknown prediction target '{other}'"))),
        }
    }
}

impl std::fmt::Display for PredictionTarget {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Response => "response",
            Self::Latent => "latent",
        })
    }
}

/// Kriging weights and conditional variance at one site.
#[derive(Debug, Clone)]
pub(crate) struct SiteSolution {
    pub weights: Vec<f64>,
    pub variance: f64,
    pub clamped: bool,
    pub jittered: bool,
}

impl SiteSolution {
    pub fn mean_offset(&self, centered: &[f64]) -> f64 {
        dot(&self.weights, centered)
    }
}

/// Conditional-Gaussian solve reused by every predictor.
pub(crate) struct Kriger {
    kernel: MaternKernel,
    params: MaternParams,
    target: PredictionTarget,
}

impl Kriger {
    pub fn new(params: &MaternParams, target: PredictionTarget, evaluations: usize) -> Result<Self> {
        let shape = MaternParams { sigma_sq: 1.0, nugget: 0.0, ..*params };
        Ok(Self { kernel: MaternKernel::for_evaluations(shape, evaluations)?, params: *params, target })
    }

    /// Marginal variance of the target with no conditioning.
    pub fn prior_variance(&self) -> f64 {
        match self.target {
            PredictionTarget::Response => self.params.sigma_sq + self.params.nugget,
            PredictionTarget::Latent => self.params.sigma_sq,
        }
    }

    /// Solves at `site` given neighbors at `coords`. `noisy[j]` says whether
    /// neighbor `j` carries the nugget on its variance (observations and
    /// simulated responses do, simulated latent values do not).
    pub fn solve(&self, site: [f64; 2], coords: &[[f64; 2]], noisy: &[bool]) -> Result<SiteSolution> {
        let k = coords.len();
        let sigma_sq = self.params.sigma_sq;
        let cross: Vec<f64> = coords.iter().map(|&c| sigma_sq * self.kernel.correlation(dist(site, c))).collect();
        let mut base = vec![0.0; k * k];
        for a in 0..k {
            for b in 0..a {
                base[a * k + b] = sigma_sq * self.kernel.correlation(dist(coords[a], coords[b]));
            }
        }
        let mut nugget = self.params.nugget;
        let mut jitters = 0;
        loop {
            let mut chol = base.clone();
            // Jitter raises every diagonal entry by the same amount.
            let extra = nugget - self.params.nugget;
            for a in 0..k {
                chol[a * k + a] = sigma_sq + extra + if noisy[a] { self.params.nugget } else { 0.0 };
            }
            match cholesky_in_place(&mut chol, k) {
                Ok(()) => {
                    let mut v = cross.clone();
                    forward_substitute(&chol, k, &mut v);
                    let explained = dot(&v, &v);
                    back_substitute_transposed(&chol, k, &mut v);
                    let prior = match self.target {
                        PredictionTarget::Response => sigma_sq + nugget,
                        PredictionTarget::Latent => sigma_sq,
                    };
                    let raw = prior - explained;
                    // Round-off can push an exact interpolation slightly negative.
                    let clamped = raw < 0.0;
                    return Ok(SiteSolution { weights: v, variance: raw.max(0.0), clamped, jittered: jitters > 0 });
                }
                Err(_) if jitters < MAX_JITTERS => {
                    jitters += 1;
                    nugget = (10.0 * nugget).max(1e-6 * sigma_sq);
                }
                Err(pivot) => return Err(Error::NotPositiveDefinite { pivot }),
            }
        }
    }
}
