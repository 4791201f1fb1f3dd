//! Maximum-likelihood fitting by Fisher scoring over an increasing
//! neighbor-count schedule, with delta-method standard errors.

mod wald;

use serde::{Deserialize, Serialize};

pub use wald::{wald_row, wald_summary, WaldRow};

use crate::error::{Error, Result};
use crate::geo::{default_block_count, maxmin_order, neighbor_sets, voronoi_partition, BlockPartition, VecchiaPlan};
use crate::likelihood::{loglik_gradient_guarded, loglik_guarded, whiten, Approximation, Guards};
use crate::model::{Dataset, LogParams, MaternParams, MeanSpec, SMOOTHNESS_MAX, SMOOTHNESS_MIN};

pub const MIN_FIT_SITES: usize = 30;
const MAX_HALVINGS: u32 = 10;
const FALLBACK_STEP: f64 = 1e-2;
/// Largest move of any log coordinate in one scoring step.
const MAX_LOG_STEP: f64 = 2.0;
const MAX_JITTERS: u32 = 3;
/// Relative distance to a box edge below which a coordinate counts as
/// saturated: its log-coordinate curvature vanishes there.
const SATURATION: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LikelihoodKind {
    #[default]
    Vecchia,
    Bcl,
    Exact,
}

impl std::str::FromStr for LikelihoodKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "vecchia" => Ok(Self::Vecchia),
            "bcl" => Ok(Self::Bcl),
            "exact" => Ok(Self::Exact),
            other => Err(Error::InvalidArgument(format!("unknown likelihood '{other}' (expected exact, vecchia or bcl)"))),
        }
    }
}

impl std::fmt::Display for LikelihoodKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Vecchia => "vecchia",
            Self::Bcl => "bcl",
            Self::Exact => "exact",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    pub likelihood: LikelihoodKind,
    pub m_seq: Vec<usize>,
    /// Iteration cap per stage.
    pub max_iter: usize,
    pub rel_tol: f64,
    pub grad_tol: f64,
    pub init: Option<MaternParams>,
    pub seed: u64,
    /// Block count for the composite likelihood; defaults to ⌊n/500⌋.
    pub n_blocks: Option<usize>,
    pub guards: Guards,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            likelihood: LikelihoodKind::Vecchia,
            m_seq: vec![10, 30, 60],
            max_iter: 100,
            rel_tol: 1e-6,
            grad_tol: 1e-4,
            init: None,
            seed: 0,
            n_blocks: None,
            guards: Guards::default(),
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        if self.m_seq.is_empty() || self.m_seq.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidArgument(format!("m_seq must be nonempty and strictly increasing, got {:?}", self.m_seq)));
        }
        if !(self.rel_tol > 0.0 && self.grad_tol > 0.0) {
            return Err(Error::InvalidArgument("tolerances must be positive".into()));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidArgument("max_iter must be positive".into()));
        }
        if let Some(p) = &self.init {
            p.validate()?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub stage: usize,
    pub m: usize,
    pub iteration: usize,
    pub loglik: f64,
    pub step: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub params: MaternParams,
    pub mean: MeanSpec,
    pub beta_hat: Vec<f64>,
    pub beta_std_errors: Vec<f64>,
    pub loglik: f64,
    /// Outer product of per-row scores, log coordinates.
    pub fisher_info: [[f64; 4]; 4],
    /// Natural scale; `None` when the information matrix is singular.
    pub std_errors: [Option<f64>; 4],
    pub iterations: usize,
    pub converged: bool,
    pub trace: Vec<TraceEntry>,
    pub likelihood: LikelihoodKind,
    /// Neighbor count of the final stage (Vecchia only).
    pub m_final: Option<usize>,
    /// Nugget jitters applied after factorization failures.
    pub jitters: u32,
    /// Smoothness started on a box edge and was pulled inside.
    pub smoothness_clamped: bool,
}

/// Heuristic start: σ² and τ² split the sample variance 9:1, φ is a tenth
/// of the bounding-box diagonal, ν = 1.
pub fn initial_params(data: &Dataset) -> Result<MaternParams> {
    let n = data.len();
    if n < 2 {
        return Err(Error::DegenerateSample(format!("need at least 2 responses, got {n}")));
    }
    let mean = data.responses.iter().sum::<f64>() / n as f64;
    let var = data.responses.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    if !(var > 0.0) {
        return Err(Error::DegenerateSample("responses have zero variance".into()));
    }
    let diag = data.points.diagonal();
    if !(diag > 0.0) {
        return Err(Error::DegenerateSample("all sites coincide".into()));
    }
    MaternParams::new(0.9 * var, 0.1 * diag, 1.0, 0.1 * var)
}

enum Objective {
    Vecchia(VecchiaPlan),
    Blocks(BlockPartition),
    Exact,
}

impl Objective {
    fn approx(&self) -> Approximation<'_> {
        match self {
            Objective::Vecchia(p) => Approximation::Vecchia(p),
            Objective::Blocks(b) => Approximation::Blocks(b),
            Objective::Exact => Approximation::Exact,
        }
    }
}

fn is_factorization_failure(e: &Error) -> bool {
    matches!(
        e,
        Error::NotPositiveDefinite { .. }
            | Error::BlockNotPositiveDefinite { .. }
            | Error::NonPositiveConditionalVariance { .. }
    )
}

fn jitter(p: &MaternParams) -> MaternParams {
    MaternParams { nugget: (10.0 * p.nugget).max(1e-6 * p.sigma_sq), ..*p }
}

struct Evaluation {
    loglik: f64,
    gradient: [f64; 4],
    fisher: [[f64; 4]; 4],
}

fn evaluate(data: &Dataset, params: &MaternParams, approx: Approximation<'_>, guards: Guards) -> Result<Evaluation> {
    let r = loglik_gradient_guarded(data, params, approx, guards)?;
    let mut fisher = [[0.0; 4]; 4];
    for s in r.per_obs_scores.as_deref().unwrap_or_default() {
        for a in 0..4 {
            for b in 0..4 {
                fisher[a][b] += s[a] * s[b];
            }
        }
    }
    Ok(Evaluation { loglik: r.value, gradient: r.gradient.expect("requested"), fisher })
}

/// Solves the 4×4 system `F d = g`; `None` when `F` is not positive definite.
fn solve4(f: &[[f64; 4]; 4], g: &[f64; 4]) -> Option<[f64; 4]> {
    let mut a: Vec<f64> = f.iter().flatten().copied().collect();
    crate::numerics::dense::cholesky_in_place(&mut a, 4).ok()?;
    let mut x = g.to_vec();
    crate::numerics::dense::forward_substitute(&a, 4, &mut x);
    crate::numerics::dense::back_substitute_transposed(&a, 4, &mut x);
    x.iter().all(|v| v.is_finite()).then(|| [x[0], x[1], x[2], x[3]])
}

fn invert4(f: &[[f64; 4]; 4]) -> Option<[[f64; 4]; 4]> {
    let mut inv = [[0.0; 4]; 4];
    for j in 0..4 {
        let mut e = [0.0; 4];
        e[j] = 1.0;
        let col = solve4(f, &e)?;
        for i in 0..4 {
            inv[i][j] = col[i];
        }
    }
    Some(inv)
}

fn norm(v: &[f64; 4]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Edge a coordinate is pressed against: `-1` at a lower edge, `1` at an
/// upper edge, `0` when interior. Only the nugget and smoothness have edges.
fn saturation(p: &MaternParams) -> [i8; 4] {
    let q = (p.smoothness - SMOOTHNESS_MIN) / (SMOOTHNESS_MAX - SMOOTHNESS_MIN);
    let nu = if q <= SATURATION {
        -1
    } else if q >= 1.0 - SATURATION {
        1
    } else {
        0
    };
    let tau = if p.nugget <= SATURATION * p.sigma_sq { -1 } else { 0 };
    [0, 0, nu, tau]
}

/// Gradient with the components that push a saturated coordinate further
/// into its edge zeroed.
fn projected_gradient(p: &MaternParams, g: &[f64; 4]) -> [f64; 4] {
    let sat = saturation(p);
    let mut out = *g;
    for k in 0..4 {
        if sat[k] != 0 && g[k] * f64::from(sat[k]) >= 0.0 {
            out[k] = 0.0;
        }
    }
    out
}

/// Scoring step in log coordinates. Coordinates held at an edge are dropped
/// from the solve; saturated coordinates moving inward have near-zero
/// curvature and are capped on their own so they do not shrink the rest of
/// the step. `None` when no coordinate is free to move.
fn scoring_direction(p: &MaternParams, eval: &Evaluation) -> Option<[f64; 4]> {
    let sat = saturation(p);
    let g = projected_gradient(p, &eval.gradient);
    let free: Vec<usize> = (0..4).filter(|&k| sat[k] == 0 || g[k] != 0.0).collect();
    if free.is_empty() || free.iter().all(|&k| g[k] == 0.0) {
        return None;
    }
    let r = free.len();
    let mut f = vec![0.0; r * r];
    for (a, &i) in free.iter().enumerate() {
        for (b, &j) in free.iter().enumerate() {
            f[a * r + b] = eval.fisher[i][j];
        }
    }
    let mut x: Vec<f64> = free.iter().map(|&k| g[k]).collect();
    let solved = crate::numerics::dense::cholesky_in_place(&mut f, r).is_ok() && {
        crate::numerics::dense::forward_substitute(&f, r, &mut x);
        crate::numerics::dense::back_substitute_transposed(&f, r, &mut x);
        x.iter().all(|v| v.is_finite())
    };
    let mut direction = [0.0; 4];
    for (a, &k) in free.iter().enumerate() {
        direction[k] = if solved { x[a] } else { g[k] };
    }
    if direction.iter().zip(&g).map(|(d, g)| d * g).sum::<f64>() <= 0.0 {
        direction = g;
    }
    let mut biggest = 0.0f64;
    for k in 0..4 {
        if sat[k] != 0 {
            direction[k] = direction[k].clamp(-MAX_LOG_STEP, MAX_LOG_STEP);
        } else {
            biggest = biggest.max(direction[k].abs());
        }
    }
    if biggest > MAX_LOG_STEP {
        for k in 0..4 {
            if sat[k] == 0 {
                direction[k] *= MAX_LOG_STEP / biggest;
            }
        }
    }
    Some(direction)
}

/// Evaluates at `params`, raising the nugget after factorization failures.
fn evaluate_with_jitter(
    data: &Dataset,
    params: &mut MaternParams,
    approx: Approximation<'_>,
    guards: Guards,
    jitters: &mut u32,
) -> Result<Evaluation> {
    loop {
        match evaluate(data, params, approx, guards) {
            Ok(e) => return Ok(e),
            Err(e) if is_factorization_failure(&e) && *jitters < MAX_JITTERS => {
                *jitters += 1;
                *params = jitter(params);
            }
            Err(e) => return Err(e),
        }
    }
}

/// Fits the Matérn parameters (and profiled mean coefficients) by Fisher
/// scoring. In Vecchia mode each neighbor count in `m_seq` is a stage
/// warm-started from the previous optimum.
pub fn fit_model(data: &Dataset, config: &FitConfig) -> Result<FitResult> {
    config.validate()?;
    if data.len() < MIN_FIT_SITES {
        return Err(Error::InvalidArgument(format!(
            "fitting needs at least {MIN_FIT_SITES} sites, got {}",
            data.len()
        )));
    }
    let mut params = match config.init {
        Some(p) => p,
        None => initial_params(data)?,
    };
    let (_, smoothness_clamped) = LogParams::from_params(&params);

    let stages: Vec<(usize, Objective)> = match config.likelihood {
        LikelihoodKind::Vecchia => {
            let order = maxmin_order(&data.points);
            config
                .m_seq
                .iter()
                .map(|&m| Ok((m, Objective::Vecchia(neighbor_sets(&data.points, &order, m)?))))
                .collect::<Result<_>>()?
        }
        LikelihoodKind::Bcl => {
            let nb = config.n_blocks.unwrap_or_else(|| default_block_count(data.len()));
            vec![(0, Objective::Blocks(voronoi_partition(&data.points, nb, config.seed)?))]
        }
        LikelihoodKind::Exact => vec![(0, Objective::Exact)],
    };

    let mut trace = Vec::new();
    let mut jitters = 0;
    let mut iterations = 0;
    let mut converged = false;
    for (stage, (m, objective)) in stages.iter().enumerate() {
        let approx = objective.approx();
        let mut eval = evaluate_with_jitter(data, &mut params, approx, config.guards, &mut jitters)?;
        trace.push(TraceEntry { stage, m: *m, iteration: 0, loglik: eval.loglik, step: 0.0 });
        converged = false;
        for iter in 1..=config.max_iter {
            if norm(&projected_gradient(&params, &eval.gradient)) <= config.grad_tol {
                converged = true;
                break;
            }
            iterations += 1;
            let (u, _) = LogParams::from_params(&params);
            let g = eval.gradient;
            let Some(direction) = scoring_direction(&params, &eval) else {
                // Every free coordinate is stationary.
                converged = true;
                break;
            };

            let try_step = |dir: &[f64; 4], lambda: f64| -> Option<(MaternParams, f64)> {
                let mut cand = u;
                for k in 0..4 {
                    cand.0[k] += lambda * dir[k];
                }
                let p = cand.to_params();
                p.validate().ok()?;
                let v = loglik_guarded(data, &p, approx, config.guards).ok()?.value;
                (v.is_finite() && v >= eval.loglik).then_some((p, v))
            };

            let mut accepted = None;
            let mut lambda = 1.0;
            for _ in 0..=MAX_HALVINGS {
                if let Some(hit) = try_step(&direction, lambda) {
                    accepted = Some((hit, lambda));
                    break;
                }
                lambda *= 0.5;
            }
            if accepted.is_none() {
                let g = projected_gradient(&params, &g);
                let gn = norm(&g);
                if gn > 0.0 {
                    let unit = g.map(|v| v / gn);
                    accepted = try_step(&unit, FALLBACK_STEP).map(|hit| (hit, FALLBACK_STEP));
                }
            }
            let Some(((new_params, new_ll), step)) = accepted else {
                // No ascent direction improves the objective: a numerical optimum.
                converged = true;
                break;
            };
            let change = (new_ll - eval.loglik).abs();
            let previous = eval.loglik;
            params = new_params;
            eval = evaluate_with_jitter(data, &mut params, approx, config.guards, &mut jitters)?;
            trace.push(TraceEntry { stage, m: *m, iteration: iter, loglik: eval.loglik, step });
            if change <= config.rel_tol * previous.abs().max(1.0) {
                converged = true;
                break;
            }
        }
    }

    let (_, last) = stages.last().expect("at least one stage");
    let approx = last.approx();
    let eval = evaluate_with_jitter(data, &mut params, approx, config.guards, &mut jitters)?;
    let sys = whiten(data, &params, approx)?;
    let beta_hat = sys.beta_hat()?;
    let beta_std_errors = beta_standard_errors(&sys)?;
    let (u, _) = LogParams::from_params(&params);
    let jac = u.jacobian_diag();
    let std_errors = match invert4(&eval.fisher) {
        Some(cov) => [0, 1, 2, 3].map(|k| Some(jac[k] * cov[k][k].max(0.0).sqrt())),
        None => [None; 4],
    };
    Ok(FitResult {
        params,
        mean: data.mean,
        beta_hat,
        beta_std_errors,
        loglik: eval.loglik,
        fisher_info: eval.fisher,
        std_errors,
        iterations,
        converged,
        trace,
        likelihood: config.likelihood,
        m_final: (config.likelihood == LikelihoodKind::Vecchia).then(|| *config.m_seq.last().expect("nonempty")),
        jitters,
        smoothness_clamped,
    })
}

/// Standard errors of β̂ from `(X̃ᵀX̃)⁻¹`.
fn beta_standard_errors(sys: &crate::likelihood::WhitenedSystem) -> Result<Vec<f64>> {
    let p = sys.n_coef;
    if p == 0 {
        return Ok(Vec::new());
    }
    let mut gram = vec![0.0; p * p];
    for r in 0..sys.len() {
        let x = &sys.whitened_design[r * p..(r + 1) * p];
        for a in 0..p {
            for b in 0..=a {
                gram[a * p + b] += x[a] * x[b];
            }
        }
    }
    crate::numerics::dense::cholesky_in_place(&mut gram, p)
        .map_err(|_| Error::InvalidArgument("whitened design is rank deficient".into()))?;
    Ok((0..p)
        .map(|k| {
            let mut e = vec![0.0; p];
            e[k] = 1.0;
            crate::numerics::dense::forward_substitute(&gram, p, &mut e);
            crate::numerics::dense::back_substitute_transposed(&gram, p, &mut e);
            e[k].sqrt()
        })
        .collect())
}
