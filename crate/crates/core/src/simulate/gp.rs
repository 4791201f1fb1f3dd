use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geo::PointSet;
use crate::model::{MaternKernel, MaternParams, MeanSpec};
use crate::numerics::dense::{cholesky_in_place, dot};

/// Largest site count simulated by dense factorization.
pub const DEFAULT_SIMULATION_MAX_N: usize = 12_000;

/// Dense Cholesky factor of the covariance at fixed sites, reusable for any
/// number of draws.
#[derive(Debug, Clone)]
pub struct GpSampler {
    n: usize,
    lower: Vec<f64>,
    trend: Vec<f64>,
}

impl GpSampler {
    pub fn new(points: &PointSet, params: &MaternParams, mean: MeanSpec, beta: &[f64]) -> Result<Self> {
        Self::with_guard(points, params, mean, beta, DEFAULT_SIMULATION_MAX_N)
    }

    pub fn with_guard(
        points: &PointSet,
        params: &MaternParams,
        mean: MeanSpec,
        beta: &[f64],
        max_n: usize,
    ) -> Result<Self> {
        params.validate()?;
        let n = points.len();
        if n > max_n {
            return Err(Error::SizeGuard { what: "dense simulation sites", size: n, limit: max_n });
        }
        if beta.len() != mean.n_cols() {
            return Err(Error::DimensionMismatch { expected: mean.n_cols(), actual: beta.len() });
        }
        let kernel = MaternKernel::for_evaluations(*params, n * n / 2)?;
        let mut lower = kernel.cov_among(points.coords());
        cholesky_in_place(&mut lower, n).map_err(|pivot| Error::NotPositiveDefinite { pivot })?;
        let trend = points.coords().iter().map(|&p| dot(&mean.row(p), beta)).collect();
        Ok(Self { n, lower, trend })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// `trend + L z` with `z` the first `n` standard normals of the seeded
    /// stream.
    pub fn draw(&self, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let z: Vec<f64> = (0..self.n).map(|_| rng.sample(StandardNormal)).collect();
        self.transform(&z)
    }

    /// Like [`Self::draw`] on stream `stream` of the seeded generator, so
    /// replicates indexed by `stream` are independent.
    pub fn draw_stream(&self, seed: u64, stream: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        let z: Vec<f64> = (0..self.n).map(|_| rng.sample(StandardNormal)).collect();
        self.transform(&z)
    }

    /// Applies `trend + L z` to caller-supplied normals.
    pub fn transform(&self, z: &[f64]) -> Vec<f64> {
        let n = self.n;
        (0..n)
            .into_par_iter()
            .with_min_len(64)
            .map(|i| self.trend[i] + dot(&self.lower[i * n..i * n + i + 1], &z[..=i]))
            .collect()
    }
}

/// One Gaussian-process realization with nugget, plus a mean trend.
pub fn simulate_gp(points: &PointSet, params: &MaternParams, mean: MeanSpec, beta: &[f64], seed: u64) -> Result<Vec<f64>> {
    Ok(GpSampler::new(points, params, mean, beta)?.draw(seed))
}
