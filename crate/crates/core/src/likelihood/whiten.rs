//! Shared machinery: every likelihood is a product of Gaussian densities of
//! whitened rows. A "unit" is a set of sites whose joint covariance is
//! factored; each unit contributes some of its rows to the whitened system.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geo::{dist, BlockPartition, VecchiaPlan};
use crate::model::{Dataset, MaternKernel, MaternParams};
use crate::numerics::dense::{cholesky_in_place, forward_substitute};

/// Units handed to one rayon task.
const UNITS_PER_TASK: usize = 128;

/// Conditional-variance floor relative to the marginal variance.
pub(crate) const COND_VAR_FLOOR: f64 = 1e-12;

/// Linear system `ỹ = X̃β + ε`, `ε ~ N(0, I)`, equivalent to the Gaussian
/// model under one of the likelihoods.
#[derive(Debug, Clone, PartialEq)]
pub struct WhitenedSystem {
    /// Original data index of each row.
    pub rows: Vec<usize>,
    pub residuals: Vec<f64>,
    /// Row-major `n × P`.
    pub whitened_design: Vec<f64>,
    pub cond_sd: Vec<f64>,
    pub n_coef: usize,
}

impl WhitenedSystem {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Generalized least squares estimate: OLS on the whitened rows.
    pub fn beta_hat(&self) -> Result<Vec<f64>> {
        let p = self.n_coef;
        if p == 0 {
            return Ok(Vec::new());
        }
        let mut gram = vec![0.0; p * p];
        let mut rhs = vec![0.0; p];
        for (r, &e) in self.residuals.iter().enumerate() {
            let x = &self.whitened_design[r * p..(r + 1) * p];
            for a in 0..p {
                rhs[a] += x[a] * e;
                for b in 0..=a {
                    gram[a * p + b] += x[a] * x[b];
                }
            }
        }
        cholesky_in_place(&mut gram, p)
            .map_err(|_| Error::InvalidArgument("whitened design is rank deficient".into()))?;
        forward_substitute(&gram, p, &mut rhs);
        crate::numerics::dense::back_substitute_transposed(&gram, p, &mut rhs);
        Ok(rhs)
    }

    /// Log-density of each row at `beta`.
    pub fn row_loglik(&self, beta: &[f64]) -> Vec<f64> {
        let p = self.n_coef;
        let half_ln_2pi = 0.5 * (2.0 * std::f64::consts::PI).ln();
        (0..self.len())
            .map(|r| {
                let x = &self.whitened_design[r * p..(r + 1) * p];
                let fitted: f64 = x.iter().zip(beta).map(|(a, b)| a * b).sum();
                let e = self.residuals[r] - fitted;
                -self.cond_sd[r].ln() - half_ln_2pi - 0.5 * e * e
            })
            .collect()
    }

    /// Total log-likelihood at `beta`, summed in row order.
    pub fn loglik(&self, beta: &[f64]) -> f64 {
        self.row_loglik(beta).iter().sum()
    }
}

/// How sites are grouped into factored units.
#[derive(Debug, Clone, Copy)]
pub enum Approximation<'a> {
    Exact,
    Vecchia(&'a VecchiaPlan),
    Blocks(&'a BlockPartition),
}

pub(crate) struct Units {
    /// Members of each unit, flattened. A Vecchia unit is `g(i)` followed by `i`.
    members: Vec<usize>,
    offsets: Vec<usize>,
    keep_last_only: bool,
    block_ids: bool,
}

impl Units {
    pub(crate) fn new(data: &Dataset, approx: Approximation<'_>) -> Result<Self> {
        let n = data.len();
        match approx {
            Approximation::Exact => {
                Ok(Self { members: (0..n).collect(), offsets: vec![0, n], keep_last_only: false, block_ids: false })
            }
            Approximation::Vecchia(plan) => {
                if plan.len() != n {
                    return Err(Error::DimensionMismatch { expected: n, actual: plan.len() });
                }
                let perm = plan.permutation();
                let mut members = Vec::with_capacity(n * (plan.m() + 1));
                let mut offsets = Vec::with_capacity(n + 1);
                offsets.push(0);
                for i in 0..n {
                    members.extend(plan.neighbors(i).iter().map(|&j| perm[j]));
                    members.push(perm[i]);
                    offsets.push(members.len());
                }
                Ok(Self { members, offsets, keep_last_only: true, block_ids: false })
            }
            Approximation::Blocks(blocks) => {
                if blocks.assignment.len() != n {
                    return Err(Error::DimensionMismatch { expected: n, actual: blocks.assignment.len() });
                }
                let mut members = Vec::with_capacity(n);
                let mut offsets = vec![0];
                for block in blocks.members() {
                    members.extend(block);
                    offsets.push(members.len());
                }
                Ok(Self { members, offsets, keep_last_only: false, block_ids: true })
            }
        }
    }

    pub(crate) fn count(&self) -> usize {
        self.offsets.len() - 1
    }

    pub(crate) fn unit(&self, u: usize) -> &[usize] {
        &self.members[self.offsets[u]..self.offsets[u + 1]]
    }

    pub(crate) fn largest(&self) -> usize {
        (0..self.count()).map(|u| self.unit(u).len()).max().unwrap_or(0)
    }

    fn rows_of(&self, u: usize) -> usize {
        if self.keep_last_only {
            1
        } else {
            self.unit(u).len()
        }
    }

    fn map_error(&self, u: usize, pivot: usize) -> Error {
        if self.keep_last_only {
            Error::NonPositiveConditionalVariance { index: u }
        } else if self.block_ids {
            Error::BlockNotPositiveDefinite { block: u + 1, pivot }
        } else {
            Error::NotPositiveDefinite { pivot }
        }
    }
}

/// Parameter variants sharing one correlation function.
struct Group {
    kernel: MaternKernel,
    /// (variant slot, σ², τ²)
    scales: Vec<(usize, f64, f64)>,
}

fn group_variants(params: &[MaternParams], evaluations: usize) -> Result<Vec<Group>> {
    let mut groups: Vec<Group> = Vec::new();
    for (v, p) in params.iter().enumerate() {
        let found = groups.iter_mut().find(|g| {
            let q = g.kernel.params();
            q.range == p.range && q.smoothness == p.smoothness
        });
        if let Some(g) = found {
            g.scales.push((v, p.sigma_sq, p.nugget));
            continue;
        }
        // Reuse the table of an earlier group with the same smoothness.
        let kernel = match groups.iter().find(|g| g.kernel.params().smoothness == p.smoothness) {
            Some(g) => g.kernel.with_range(p.range)?,
            None => MaternKernel::for_evaluations(MaternParams { sigma_sq: 1.0, nugget: 0.0, ..*p }, evaluations)?,
        };
        groups.push(Group { kernel, scales: vec![(v, p.sigma_sq, p.nugget)] });
    }
    Ok(groups)
}

struct Scratch {
    dists: Vec<f64>,
    ln_dists: Vec<f64>,
    corr: Vec<f64>,
    cov: Vec<f64>,
    rhs: Vec<f64>,
}

struct ChunkOut {
    /// Per variant: residuals, design, cond_sd for the chunk's rows.
    resid: Vec<Vec<f64>>,
    design: Vec<Vec<f64>>,
    sd: Vec<Vec<f64>>,
    rows: Vec<usize>,
}

/// Whitens the data under each parameter vector in `params` in one pass,
/// sharing distance and correlation work across variants that differ only
/// in σ² or τ².
pub(crate) fn whiten_variants(
    data: &Dataset,
    units: &Units,
    params: &[MaternParams],
) -> Result<Vec<WhitenedSystem>> {
    let pairs: usize = (0..units.count()).map(|u| units.unit(u).len().pow(2) / 2).sum();
    let groups = group_variants(params, pairs)?;
    let cache = groups.len() > 1;
    let cache_log = cache && groups.iter().any(|g| g.kernel.uses_log_distance());
    let nv = params.len();
    let p = data.mean.n_cols();
    let design = data.design();
    let coords = data.points.coords();
    let y = &data.responses;
    let n_units = units.count();
    let n_tasks = n_units.div_ceil(UNITS_PER_TASK);

    let chunks: Vec<Result<ChunkOut>> = (0..n_tasks)
        .into_par_iter()
        .map(|task| {
            let lo = task * UNITS_PER_TASK;
            let hi = (lo + UNITS_PER_TASK).min(n_units);
            let n_rows: usize = (lo..hi).map(|u| units.rows_of(u)).sum();
            let mut out = ChunkOut {
                resid: vec![Vec::with_capacity(n_rows); nv],
                design: vec![Vec::with_capacity(n_rows * p); nv],
                sd: vec![Vec::with_capacity(n_rows); nv],
                rows: Vec::with_capacity(n_rows),
            };
            let mut s = Scratch { dists: Vec::new(), ln_dists: Vec::new(), corr: Vec::new(), cov: Vec::new(), rhs: Vec::new() };
            for u in lo..hi {
                let members = units.unit(u);
                let k = members.len();
                let first_kept = if units.keep_last_only { k - 1 } else { 0 };
                out.rows.extend_from_slice(&members[first_kept..]);
                // Distances are cached only when several correlation functions need them.
                if cache {
                    s.dists.clear();
                    s.dists.resize(k * k, 0.0);
                    for a in 0..k {
                        for b in 0..a {
                            s.dists[a * k + b] = dist(coords[members[a]], coords[members[b]]);
                        }
                    }
                    if cache_log {
                        s.ln_dists.clear();
                        s.ln_dists.extend(s.dists.iter().map(|d| d.ln()));
                    }
                }
                for g in &groups {
                    s.corr.clear();
                    s.corr.resize(k * k, 0.0);
                    for a in 0..k {
                        for b in 0..a {
                            let idx = a * k + b;
                            s.corr[idx] = if cache_log {
                                g.kernel.correlation_with_log(s.dists[idx], s.ln_dists[idx])
                            } else if cache {
                                g.kernel.correlation(s.dists[idx])
                            } else {
                                g.kernel.correlation(dist(coords[members[a]], coords[members[b]]))
                            };
                        }
                    }
                    let last_scale = g.scales.len() - 1;
                    for (slot, &(v, sigma_sq, nugget)) in g.scales.iter().enumerate() {
                        if slot == last_scale {
                            // The correlation buffer is no longer needed; reuse it.
                            std::mem::swap(&mut s.cov, &mut s.corr);
                            s.cov.iter_mut().for_each(|c| *c *= sigma_sq);
                        } else {
                            s.cov.clear();
                            s.cov.extend(s.corr.iter().map(|c| sigma_sq * c));
                        }
                        for a in 0..k {
                            s.cov[a * k + a] = sigma_sq + nugget;
                        }
                        cholesky_in_place(&mut s.cov, k).map_err(|piv| units.map_error(u, piv))?;
                        if units.keep_last_only {
                            let floor = (COND_VAR_FLOOR * (sigma_sq + nugget)).sqrt();
                            let d = &mut s.cov[k * k - 1];
                            *d = d.max(floor);
                        }
                        // Response column, then each design column.
                        for col in 0..=p {
                            s.rhs.clear();
                            if col == 0 {
                                s.rhs.extend(members.iter().map(|&m| y[m]));
                            } else {
                                s.rhs.extend(members.iter().map(|&m| design[(m, col - 1)]));
                            }
                            forward_substitute(&s.cov, k, &mut s.rhs);
                            if col == 0 {
                                out.resid[v].extend_from_slice(&s.rhs[first_kept..]);
                            } else {
                                // Interleave into row-major after all columns are known.
                                out.design[v].extend_from_slice(&s.rhs[first_kept..]);
                            }
                        }
                        // Columns were appended column-by-column for this unit; transpose in place.
                        let kept = k - first_kept;
                        if p > 1 {
                            let start = out.design[v].len() - kept * p;
                            let block: Vec<f64> = out.design[v][start..].to_vec();
                            for r in 0..kept {
                                for c in 0..p {
                                    out.design[v][start + r * p + c] = block[c * kept + r];
                                }
                            }
                        }
                        out.sd[v].extend((first_kept..k).map(|a| s.cov[a * k + a]));
                    }
                }
            }
            Ok(out)
        })
        .collect();

    let n_rows: usize = (0..n_units).map(|u| units.rows_of(u)).sum();
    let mut systems: Vec<WhitenedSystem> = (0..nv)
        .map(|_| WhitenedSystem {
            rows: Vec::with_capacity(n_rows),
            residuals: Vec::with_capacity(n_rows),
            whitened_design: Vec::with_capacity(n_rows * p),
            cond_sd: Vec::with_capacity(n_rows),
            n_coef: p,
        })
        .collect();
    for chunk in chunks {
        let chunk = chunk?;
        for (v, sys) in systems.iter_mut().enumerate() {
            sys.rows.extend_from_slice(&chunk.rows);
            sys.residuals.extend_from_slice(&chunk.resid[v]);
            sys.whitened_design.extend_from_slice(&chunk.design[v]);
            sys.cond_sd.extend_from_slice(&chunk.sd[v]);
        }
    }
    Ok(systems)
}
