//! Exact, Vecchia and block-composite Gaussian log-likelihoods with the
//! mean coefficients profiled out, plus finite-difference gradients.

mod whiten;

use serde::{Deserialize, Serialize};

pub use whiten::{Approximation, WhitenedSystem};
pub(crate) use whiten::{whiten_variants, Units};

use crate::error::{Error, Result};
use crate::geo::{BlockPartition, VecchiaPlan};
use crate::model::{Dataset, LogParams, MaternParams};

pub const DEFAULT_EXACT_MAX_N: usize = 10_000;
pub const DEFAULT_MAX_BLOCK: usize = 2_000;
/// Step for central differences in log coordinates.
pub const FD_STEP: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoglikResult {
    pub value: f64,
    /// Empty for a zero mean.
    pub beta_hat: Vec<f64>,
    /// In log coordinates `(log σ², log φ, logit ν, log τ²)`.
    pub gradient: Option<[f64; 4]>,
    /// Per whitened row, in row order.
    pub per_obs_scores: Option<Vec<[f64; 4]>>,
}

/// Size limits that protect against accidental huge dense factorizations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Guards {
    pub exact_max_n: usize,
    pub max_block: usize,
}

impl Default for Guards {
    fn default() -> Self {
        Self { exact_max_n: DEFAULT_EXACT_MAX_N, max_block: DEFAULT_MAX_BLOCK }
    }
}

fn check_guards(data: &Dataset, approx: Approximation<'_>, units: &Units, guards: Guards) -> Result<()> {
    match approx {
        Approximation::Exact if data.len() > guards.exact_max_n => {
            Err(Error::SizeGuard { what: "exact likelihood sites", size: data.len(), limit: guards.exact_max_n })
        }
        Approximation::Blocks(_) if units.largest() > guards.max_block => {
            Err(Error::SizeGuard { what: "likelihood block size", size: units.largest(), limit: guards.max_block })
        }
        _ => Ok(()),
    }
}

/// Whitened system for one parameter vector.
pub fn whiten(data: &Dataset, params: &MaternParams, approx: Approximation<'_>) -> Result<WhitenedSystem> {
    params.validate()?;
    let units = Units::new(data, approx)?;
    Ok(whiten_variants(data, &units, std::slice::from_ref(params))?.remove(0))
}

/// Profiled log-likelihood under the chosen approximation.
pub fn loglik(data: &Dataset, params: &MaternParams, approx: Approximation<'_>) -> Result<LoglikResult> {
    loglik_guarded(data, params, approx, Guards::default())
}

pub fn loglik_guarded(
    data: &Dataset,
    params: &MaternParams,
    approx: Approximation<'_>,
    guards: Guards,
) -> Result<LoglikResult> {
    params.validate()?;
    let units = Units::new(data, approx)?;
    check_guards(data, approx, &units, guards)?;
    let sys = whiten_variants(data, &units, std::slice::from_ref(params))?.remove(0);
    let beta_hat = sys.beta_hat()?;
    Ok(LoglikResult { value: sys.loglik(&beta_hat), beta_hat, gradient: None, per_obs_scores: None })
}

/// Dense Gaussian log-likelihood with β profiled by GLS.
pub fn exact_loglik(data: &Dataset, params: &MaternParams) -> Result<LoglikResult> {
    loglik(data, params, Approximation::Exact)
}

/// Vecchia log-likelihood: product of conditionals `f(y_i | y_{g(i)})`.
pub fn vecchia_loglik(data: &Dataset, params: &MaternParams, plan: &VecchiaPlan) -> Result<LoglikResult> {
    loglik(data, params, Approximation::Vecchia(plan))
}

/// Block composite log-likelihood: blocks treated as independent.
pub fn bcl_loglik(data: &Dataset, params: &MaternParams, blocks: &BlockPartition) -> Result<LoglikResult> {
    loglik(data, params, Approximation::Blocks(blocks))
}

/// Log-likelihood, its gradient in log coordinates by central differences,
/// and per-row score vectors (differences of each row's log-density with β
/// held at its profiled value).
pub fn loglik_gradient(data: &Dataset, params: &MaternParams, approx: Approximation<'_>) -> Result<LoglikResult> {
    loglik_gradient_guarded(data, params, approx, Guards::default())
}

pub fn loglik_gradient_guarded(
    data: &Dataset,
    params: &MaternParams,
    approx: Approximation<'_>,
    guards: Guards,
) -> Result<LoglikResult> {
    params.validate()?;
    let units = Units::new(data, approx)?;
    check_guards(data, approx, &units, guards)?;
    let (u, _) = LogParams::from_params(params);
    let mut variants = vec![*params];
    for k in 0..4 {
        for sign in [1.0, -1.0] {
            let mut shifted = u;
            shifted.0[k] += sign * FD_STEP;
            variants.push(shifted.to_params());
        }
    }
    let systems = whiten_variants(data, &units, &variants)?;
    let beta_hat = systems[0].beta_hat()?;
    let base_rows = systems[0].row_loglik(&beta_hat);
    let value: f64 = base_rows.iter().sum();

    let mut gradient = [0.0; 4];
    let mut scores = vec![[0.0; 4]; base_rows.len()];
    for k in 0..4 {
        let (plus, minus) = (&systems[1 + 2 * k], &systems[2 + 2 * k]);
        let lp = plus.loglik(&plus.beta_hat()?);
        let lm = minus.loglik(&minus.beta_hat()?);
        gradient[k] = (lp - lm) / (2.0 * FD_STEP);
        let rp = plus.row_loglik(&beta_hat);
        let rm = minus.row_loglik(&beta_hat);
        for (s, (a, b)) in scores.iter_mut().zip(rp.iter().zip(&rm)) {
            s[k] = (a - b) / (2.0 * FD_STEP);
        }
    }
    if !gradient.iter().all(|g| g.is_finite()) {
        return Err(Error::Domain("non-finite likelihood gradient".into()));
    }
    Ok(LoglikResult { value, beta_hat, gradient: Some(gradient), per_obs_scores: Some(scores) })
}
