use std::sync::Arc;

use super::params::MaternParams;
use crate::error::{Error, Result};
use crate::geo::{dist, PointSet};
use crate::numerics::special::ln_gamma;
use crate::numerics::{BesselK, DenseMatrix};

/// Interpolation grid in `u = ln x`.
const TABLE_U_MIN: f64 = -6.907_755_278_982_137; // ln 1e-3
const TABLE_U_MAX: f64 = 3.912_023_005_428_146; // ln 50
const TABLE_STEPS_PER_UNIT: f64 = 256.0;

/// Evaluation count above which building the table is cheaper than direct
/// Bessel calls (a table costs about 3000 of them).
pub const TABULATE_ABOVE: usize = 4_000;

/// Beyond this `ν ln(1/x)` the correlation is 1 to working precision and
/// the Bessel value would overflow.
const TINY_X_CUTOFF: f64 = 600.0;

/// Cubic Hermite table of `ln ρ(e^u)` with exact derivatives at the nodes.
#[derive(Debug)]
struct LogCorrelationTable {
    inv_h: f64,
    h: f64,
    values: Vec<f64>,
    slopes: Vec<f64>,
}

impl LogCorrelationTable {
    fn build(nu: f64, bessel: &BesselK, ln_c: f64) -> Self {
        let lower = BesselK::new((nu - 1.0).abs()).expect("order within range");
        let n = ((TABLE_U_MAX - TABLE_U_MIN) * TABLE_STEPS_PER_UNIT).ceil() as usize;
        let h = (TABLE_U_MAX - TABLE_U_MIN) / n as f64;
        let mut values = Vec::with_capacity(n + 1);
        let mut slopes = Vec::with_capacity(n + 1);
        for j in 0..=n {
            let u = TABLE_U_MIN + h * j as f64;
            let x = u.exp();
            let k = bessel.eval_scaled(x);
            values.push(ln_c + nu * u - x + k.ln());
            // d/dx [x^ν K_ν] = −x^ν K_{ν−1}, so d ln ρ / du = −x K_{ν−1}/K_ν.
            slopes.push(-x * lower.eval_scaled(x) / k);
        }
        Self { inv_h: 1.0 / h, h, values, slopes }
    }

    #[inline]
    fn eval(&self, u: f64) -> f64 {
        let s = (u - TABLE_U_MIN) * self.inv_h;
        let j = (s as usize).min(self.values.len() - 2);
        let t = s - j as f64;
        let t2 = t * t;
        let t3 = t2 * t;
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        h00 * self.values[j]
            + h10 * self.h * self.slopes[j]
            + h01 * self.values[j + 1]
            + h11 * self.h * self.slopes[j + 1]
    }
}

#[derive(Debug, Clone)]
enum Shape {
    /// ν = k + ½: `ρ(x) = e^{−x} Σ a_i x^i`.
    HalfInteger(Vec<f64>),
    General { bessel: BesselK, ln_c: f64, table: Option<Arc<LogCorrelationTable>> },
}

/// Matérn covariance
/// `σ² 2^{1−ν}/Γ(ν) (d/φ)^ν K_ν(d/φ) + τ² 1[same site]`
/// with order-dependent constants precomputed.
#[derive(Debug, Clone)]
pub struct MaternKernel {
    params: MaternParams,
    ln_range: f64,
    shape: Shape,
}

fn half_integer_coefficients(k: u32) -> Vec<f64> {
    let fact = |n: u32| (1..=n).map(f64::from).product::<f64>();
    (0..=k)
        .map(|i| fact(2 * k - i) / (fact(k - i) * fact(i)) * 2f64.powi(i as i32) * fact(k) / fact(2 * k))
        .collect()
}

impl MaternKernel {
    /// Kernel evaluated through the Bessel function on every call.
    pub fn new(params: MaternParams) -> Result<Self> {
        Self::build(params, false)
    }

    /// Kernel that interpolates a per-ν table for `d/φ ∈ [1e-3, 50]`
    /// (relative error below 1e-10) and falls back to direct evaluation
    /// elsewhere. Worth it beyond a few thousand evaluations.
    pub fn tabulated(params: MaternParams) -> Result<Self> {
        Self::build(params, true)
    }

    fn build(params: MaternParams, table: bool) -> Result<Self> {
        params.validate()?;
        let nu = params.smoothness;
        let k = nu - 0.5;
        let shape = if k >= 0.0 && k.fract() == 0.0 && k <= 8.0 {
            Shape::HalfInteger(half_integer_coefficients(k as u32))
        } else {
            let bessel = BesselK::new(nu)?;
            let ln_c = (1.0 - nu) * std::f64::consts::LN_2 - ln_gamma(nu);
            let table = table.then(|| Arc::new(LogCorrelationTable::build(nu, &bessel, ln_c)));
            Shape::General { bessel, ln_c, table }
        };
        Ok(Self { params, ln_range: params.range.ln(), shape })
    }

    /// Tabulated when `evaluations` exceeds [`TABULATE_ABOVE`].
    pub fn for_evaluations(params: MaternParams, evaluations: usize) -> Result<Self> {
        Self::build(params, evaluations > TABULATE_ABOVE)
    }

    pub fn params(&self) -> &MaternParams {
        &self.params
    }

    /// Same smoothness (and shared table) with another range.
    pub fn with_range(&self, range: f64) -> Result<Self> {
        let params = MaternParams { range, ..self.params };
        params.validate()?;
        Ok(Self { params, ln_range: range.ln(), shape: self.shape.clone() })
    }

    /// Whether [`Self::correlation_with_log`] reads its `ln_d` argument.
    pub fn uses_log_distance(&self) -> bool {
        matches!(self.shape, Shape::General { .. })
    }

    /// Correlation at distance `d > 0` given `ln_d = ln d`, which callers
    /// evaluating several kernels at the same distance compute once.
    #[inline]
    pub fn correlation_with_log(&self, d: f64, ln_d: f64) -> f64 {
        if d == 0.0 {
            return 1.0;
        }
        match &self.shape {
            Shape::HalfInteger(_) => self.correlation(d),
            Shape::General { bessel, ln_c, table } => {
                let nu = self.params.smoothness;
                let u = ln_d - self.ln_range;
                if -nu * u > TINY_X_CUTOFF {
                    return 1.0;
                }
                let ln_rho = match table {
                    Some(t) if (TABLE_U_MIN..=TABLE_U_MAX).contains(&u) => t.eval(u),
                    _ => {
                        let x = d / self.params.range;
                        ln_c + nu * u - x + bessel.eval_scaled(x).ln()
                    }
                };
                ln_rho.exp().min(1.0)
            }
        }
    }

    /// Correlation `ρ(x)` at scaled distance `x = d/φ ≥ 0`.
    #[inline]
    pub fn correlation_scaled(&self, x: f64) -> f64 {
        if x == 0.0 {
            return 1.0;
        }
        match &self.shape {
            Shape::HalfInteger(a) => {
                let poly = a.iter().rev().fold(0.0, |acc, &c| acc * x + c);
                poly * (-x).exp()
            }
            Shape::General { bessel, ln_c, table } => {
                let nu = self.params.smoothness;
                let u = x.ln();
                if -nu * u > TINY_X_CUTOFF {
                    return 1.0;
                }
                let ln_rho = match table {
                    Some(t) if (TABLE_U_MIN..=TABLE_U_MAX).contains(&u) => t.eval(u),
                    _ => ln_c + nu * u - x + bessel.eval_scaled(x).ln(),
                };
                ln_rho.exp().min(1.0)
            }
        }
    }

    /// Correlation at distance `d`.
    #[inline]
    pub fn correlation(&self, d: f64) -> f64 {
        self.correlation_scaled(d / self.params.range)
    }

    /// Covariance at distance `d`; the nugget is added only for the same site.
    #[inline]
    pub fn cov(&self, d: f64, same_site: bool) -> f64 {
        let c = self.params.sigma_sq * self.correlation(d);
        if same_site {
            c + self.params.nugget
        } else {
            c
        }
    }

    /// Covariance among `coords` (nugget on the diagonal), row-major `n × n`.
    pub fn cov_among(&self, coords: &[[f64; 2]]) -> Vec<f64> {
        let n = coords.len();
        let mut out = vec![0.0; n * n];
        let diag = self.params.total_variance();
        for i in 0..n {
            out[i * n + i] = diag;
            for j in 0..i {
                let c = self.cov(dist(coords[i], coords[j]), false);
                out[i * n + j] = c;
                out[j * n + i] = c;
            }
        }
        out
    }
}

/// Matérn covariance at a single distance.
pub fn matern_cov(distance: f64, params: &MaternParams, same_site: bool) -> Result<f64> {
    if !(distance >= 0.0 && distance.is_finite()) {
        return Err(Error::Domain(format!("distance must be finite and nonnegative, got {distance}")));
    }
    Ok(MaternKernel::new(*params)?.cov(distance, same_site))
}

/// Covariance between two point sets. With `shared_sites` the sets are the
/// same sites and the nugget is added on the diagonal.
pub fn cov_matrix(a: &PointSet, b: &PointSet, params: &MaternParams, shared_sites: bool) -> Result<DenseMatrix> {
    if shared_sites && a.len() != b.len() {
        return Err(Error::DimensionMismatch { expected: a.len(), actual: b.len() });
    }
    let kernel = MaternKernel::for_evaluations(*params, a.len() * b.len())?;
    if shared_sites {
        return DenseMatrix::new(a.len(), a.len(), kernel.cov_among(a.coords()));
    }
    Ok(DenseMatrix::from_fn(a.len(), b.len(), |i, j| kernel.cov(dist(a.get(i), b.get(j)), false)))
}
