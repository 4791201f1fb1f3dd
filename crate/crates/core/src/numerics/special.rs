//! Normal distribution helpers, Gauss–Legendre nodes and Owen's T.

use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::sync::OnceLock;

/// Standard normal CDF.
#[inline]
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x * FRAC_1_SQRT_2)
}

/// Standard normal upper tail, `1 − Φ(x)`, without cancellation.
#[inline]
pub fn normal_sf(x: f64) -> f64 {
    0.5 * libm::erfc(x * FRAC_1_SQRT_2)
}

#[inline]
pub fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

/// Standard normal quantile (Wichura's AS241 rational approximations,
/// polished with one Newton step).
pub fn normal_quantile(p: f64) -> f64 {
    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    let q = p - 0.5;
    let mut x = if q.abs() <= 0.425 {
        let r = 0.180625 - q * q;
        q * (((((((r * 2509.080_928_730_122_7 + 33430.575_583_588_13) * r + 67265.770_927_008_7) * r
            + 45921.953_931_549_87)
            * r
            + 13731.693_765_509_461)
            * r
            + 1971.590_950_306_551_4)
            * r
            + 133.141_667_891_784_38)
            * r
            + 3.387_132_872_796_366_5)
            / (((((((r * 5226.495_278_852_546 + 28729.085_735_721_943) * r + 39307.895_800_092_71) * r
                + 21213.794_301_586_597)
                * r
                + 5394.196_021_424_751)
                * r
                + 687.187_007_492_057_9)
                * r
                + 42.313_330_701_600_91)
                * r
                + 1.0)
    } else {
        let mut r = if q < 0.0 { p } else { 1.0 - p };
        r = (-r.ln()).sqrt();
        let v = if r <= 5.0 {
            r -= 1.6;
            (((((((r * 7.745_450_142_783_414e-4 + 0.022_723_844_989_269_184) * r + 0.241_780_725_177_450_6)
                * r
                + 1.270_458_252_452_368_4)
                * r
                + 3.647_848_324_763_205)
                * r
                + 5.769_497_221_460_691)
                * r
                + 4.630_337_846_156_546)
                * r
                + 1.423_437_110_749_683_5)
                / (((((((r * 1.050_750_071_644_416_8e-9 + 5.475_938_084_995_345e-4) * r
                    + 0.015_198_666_563_616_457)
                    * r
                    + 0.148_103_976_427_480_07)
                    * r
                    + 0.689_767_334_985_1)
                    * r
                    + 1.676_384_830_183_803_8)
                    * r
                    + 2.053_191_626_637_759)
                    * r
                    + 1.0)
        } else {
            r -= 5.0;
            (((((((r * 2.010_334_399_292_288_1e-7 + 2.711_555_568_743_487_6e-5) * r
                + 0.001_242_660_947_388_078_4)
                * r
                + 0.026_532_189_526_576_124)
                * r
                + 0.296_560_571_828_504_9)
                * r
                + 1.784_826_539_917_291_3)
                * r
                + 5.463_784_911_164_114)
                * r
                + 6.657_904_643_501_103)
                / (((((((r * 2.044_263_103_389_939_7e-15 + 1.421_511_758_316_446e-7) * r
                    + 1.846_318_317_510_054_8e-5)
                    * r
                    + 7.868_691_311_456_133e-4)
                    * r
                    + 0.014_875_361_290_850_615)
                    * r
                    + 0.136_929_880_922_735_8)
                    * r
                    + 0.599_832_206_555_887_9)
                    * r
                    + 1.0)
        };
        if q < 0.0 {
            -v
        } else {
            v
        }
    };
    // Newton polish against the erfc-based CDF.
    let pdf = normal_pdf(x);
    if pdf > 1e-300 {
        let err = if x > 0.0 { (1.0 - p) - normal_sf(x) } else { normal_cdf(x) - p };
        let step = if x > 0.0 { -err / pdf } else { err / pdf };
        x -= step;
    }
    x
}

/// Nodes and weights of the 64-point Gauss–Legendre rule on [-1, 1].
pub fn gauss_legendre_64() -> &'static ([f64; 64], [f64; 64]) {
    static RULE: OnceLock<([f64; 64], [f64; 64])> = OnceLock::new();
    RULE.get_or_init(|| gauss_legendre::<64>())
}

fn gauss_legendre<const N: usize>() -> ([f64; N], [f64; N]) {
    let mut nodes = [0.0; N];
    let mut weights = [0.0; N];
    let n = N as f64;
    for i in 0..N.div_ceil(2) {
        let mut x = (PI * (i as f64 + 0.75) / (n + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            // Legendre recurrence for P_N(x) and its derivative.
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=N {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            dp = n * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[N - 1 - i] = x;
        weights[i] = w;
        weights[N - 1 - i] = w;
    }
    (nodes, weights)
}

/// Owen's T function `T(h, a) = (1/2π) ∫₀^a exp(−h²(1+x²)/2) / (1+x²) dx`.
///
/// Uses 64-point Gauss–Legendre on `[0, a]` for `|a| ≤ 1` and the
/// reflection `T(h,a) = ½[Φ(h)Q(ah) + Φ(ah)Q(h)] − T(ah, 1/a)` otherwise.
pub fn owens_t(h: f64, a: f64) -> f64 {
    if a < 0.0 {
        return -owens_t(h, -a);
    }
    if a == 0.0 {
        return 0.0;
    }
    let h = h.abs();
    if a <= 1.0 {
        return owens_t_quadrature(h, a);
    }
    if a.is_infinite() {
        return 0.5 * normal_sf(h);
    }
    let ah = a * h;
    0.5 * (normal_cdf(h) * normal_sf(ah) + normal_cdf(ah) * normal_sf(h)) - owens_t_quadrature(ah, 1.0 / a)
}

fn owens_t_quadrature(h: f64, a: f64) -> f64 {
    let (nodes, weights) = gauss_legendre_64();
    let half = 0.5 * a;
    let hh = -0.5 * h * h;
    let mut s = 0.0;
    for (&t, &w) in nodes.iter().zip(weights) {
        let x = half * (t + 1.0);
        let q = 1.0 + x * x;
        s += w * (hh * q).exp() / q;
    }
    s * half / (2.0 * PI)
}

pub fn ln_gamma(x: f64) -> f64 {
    libm::lgamma(x)
}

pub fn gamma(x: f64) -> f64 {
    libm::tgamma(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantile_known_values() {
        assert!((normal_quantile(0.975) - 1.959_963_984_540_054).abs() < 1e-14);
        assert!((normal_quantile(0.5)).abs() < 1e-15);
        assert!((normal_quantile(1e-10) + 6.361_340_902_404_056).abs() < 1e-10);
        for &p in &[1e-12, 1e-5, 0.01, 0.2, 0.49, 0.51, 0.9, 0.999_99] {
            let x = normal_quantile(p);
            let back = normal_cdf(x);
            assert!((back - p).abs() <= 1e-14 * p.max(1e-3), "p = {p}");
        }
    }

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let (x, w) = gauss_legendre_64();
        let sum: f64 = w.iter().sum();
        assert!((sum - 2.0).abs() < 1e-14);
        // ∫ x^126 over [-1, 1] = 2/127; exact for degree ≤ 127.
        let s: f64 = x.iter().zip(w).map(|(x, w)| w * x.powi(126)).sum();
        assert!((s - 2.0 / 127.0).abs() < 1e-14);
    }

    #[test]
    fn owens_t_reference_points() {
        // T(0, a) = atan(a) / 2π.
        for &a in &[0.3, 1.0, 2.5, 30.0] {
            assert!((owens_t(0.0, a) - a.atan() / (2.0 * PI)).abs() < 1e-15);
        }
        // T(h, 1) = Φ(h) Q(h) / 2.
        for &h in &[0.1, 1.0, 3.0] {
            let expected = 0.5 * normal_cdf(h) * normal_sf(h);
            assert!((owens_t(h, 1.0) - expected).abs() < 1e-15);
        }
        // Continuity across the a = 1 switch.
        let below = owens_t(0.7, 1.0 - 1e-9);
        let above = owens_t(0.7, 1.0 + 1e-9);
        assert!((below - above).abs() < 1e-9);
    }

    #[test]
    fn owens_t_matches_composite_simpson() {
        for &(h, a) in &[(0.5, 0.4), (1.3, 3.0), (2.0, 10.0), (0.2, 25.0)] {
            let n = 200_000;
            let dx = a / n as f64;
            let f = |x: f64| (-0.5 * h * h * (1.0 + x * x)).exp() / (1.0 + x * x);
            let mut s = f(0.0) + f(a);
            for i in 1..n {
                s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(i as f64 * dx);
            }
            let reference = s * dx / 3.0 / (2.0 * PI);
            assert!((owens_t(h, a) - reference).abs() < 1e-10, "h={h} a={a}");
        }
    }
}
