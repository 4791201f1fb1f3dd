use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geo::PointSet;

/// Point-pattern families on the unit square. Shapes are qualitative
/// analogs of competition layouts; every parameter is configurable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PatternKind {
    Homogeneous,
    /// A fraction of the points falls uniformly in `rect`
    /// (`[xmin, ymin, xmax, ymax]`), the rest uniformly outside it.
    DenseSubregion { rect: [f64; 4], fraction: f64 },
    /// Unit square ⊃ `middle` ⊃ `inner`, with relative point densities for
    /// the outer ring, middle ring and inner rectangle.
    NestedDensity { middle: [f64; 4], inner: [f64; 4], densities: [f64; 3] },
    /// Uniform except inside horizontal bands `[y_lo, y_hi]`.
    StripedGaps { stripes: Vec<[f64; 2]> },
    /// Uniform-in-disk clusters of equal weight, plus a uniform background
    /// fraction. Points falling outside the square are redrawn.
    CircularClusters { centers: Vec<[f64; 2]>, radius: f64, background: f64 },
}

impl PatternKind {
    pub fn homogeneous() -> Self {
        Self::Homogeneous
    }

    /// 80% of the points in the left half.
    pub fn dense_subregion() -> Self {
        Self::DenseSubregion { rect: [0.0, 0.0, 0.5, 1.0], fraction: 0.8 }
    }

    /// The inner rectangle covers 6.25% of the area.
    pub fn nested_density() -> Self {
        Self::NestedDensity {
            middle: [0.25, 0.25, 0.75, 0.75],
            inner: [0.375, 0.375, 0.625, 0.625],
            densities: [1.0, 4.0, 16.0],
        }
    }

    /// Six evenly spaced empty bands of width 0.04.
    pub fn striped_gaps() -> Self {
        let stripes = (0..6).map(|k| (k as f64 + 0.5) / 6.0).map(|c| [c - 0.02, c + 0.02]).collect();
        Self::StripedGaps { stripes }
    }

    pub fn circular_clusters() -> Self {
        Self::CircularClusters {
            centers: vec![[0.2, 0.2], [0.5, 0.25], [0.8, 0.2], [0.2, 0.75], [0.5, 0.8], [0.8, 0.7]],
            radius: 0.06,
            background: 0.1,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Homogeneous => "homogeneous",
            Self::DenseSubregion { .. } => "dense_subregion",
            Self::NestedDensity { .. } => "nested_density",
            Self::StripedGaps { .. } => "striped_gaps",
            Self::CircularClusters { .. } => "circular_clusters",
        }
    }
}

impl std::str::FromStr for PatternKind {
    type Err = Error;

    /// Parses a family name into its default shape.
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "homogeneous" => Ok(Self::homogeneous()),
            "dense_subregion" => Ok(Self::dense_subregion()),
            "nested_density" => Ok(Self::nested_density()),
            "striped_gaps" => Ok(Self::striped_gaps()),
            "circular_clusters" => Ok(Self::circular_clusters()),
            other => Err(Error::InvalidArgument(format!(
                "unknown pattern '{other}' (expected homogeneous, dense_subregion, nested_density, striped_gaps or circular_clusters)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatternSpec {
    pub kind: PatternKind,
    pub n: usize,
    pub seed: u64,
}

fn in_unit(v: f64) -> bool {
    (0.0..=1.0).contains(&v)
}

fn check_rect(r: &[f64; 4], what: &str) -> Result<()> {
    if !(r.iter().all(|&v| in_unit(v)) && r[0] < r[2] && r[1] < r[3]) {
        return Err(Error::InvalidArgument(format!("{what} {r:?} is not a nondegenerate rectangle in the unit square")));
    }
    Ok(())
}

fn area(r: &[f64; 4]) -> f64 {
    (r[2] - r[0]) * (r[3] - r[1])
}

fn contains(r: &[f64; 4], p: [f64; 2]) -> bool {
    p[0] >= r[0] && p[0] <= r[2] && p[1] >= r[1] && p[1] <= r[3]
}

fn uniform_in(rng: &mut ChaCha8Rng, r: &[f64; 4]) -> [f64; 2] {
    [r[0] + (r[2] - r[0]) * rng.random::<f64>(), r[1] + (r[3] - r[1]) * rng.random::<f64>()]
}

/// Uniform in `outer` minus `hole`, by rejection.
fn uniform_ring(rng: &mut ChaCha8Rng, outer: &[f64; 4], hole: &[f64; 4]) -> [f64; 2] {
    loop {
        let p = uniform_in(rng, outer);
        if !contains(hole, p) {
            return p;
        }
    }
}

/// Complement of the union of `stripes` in `[0, 1]`, as sorted intervals.
fn open_bands(stripes: &[[f64; 2]]) -> Result<Vec<[f64; 2]>> {
    let mut s: Vec<[f64; 2]> = stripes.to_vec();
    for b in &s {
        if !(in_unit(b[0]) && in_unit(b[1]) && b[0] < b[1]) {
            return Err(Error::InvalidArgument(format!("stripe {b:?} is not an interval inside [0, 1]")));
        }
    }
    s.sort_by(|a, b| a[0].total_cmp(&b[0]));
    let mut open = Vec::new();
    let mut cursor = 0.0;
    for b in s {
        if b[0] > cursor {
            open.push([cursor, b[0]]);
        }
        cursor = f64::max(cursor, b[1]);
    }
    if cursor < 1.0 {
        open.push([cursor, 1.0]);
    }
    if open.is_empty() {
        return Err(Error::InvalidArgument("stripes cover the whole domain".into()));
    }
    Ok(open)
}

/// Draws exactly `spec.n` points in the unit square.
pub fn generate_pattern(spec: &PatternSpec) -> Result<PointSet> {
    if spec.n == 0 {
        return Err(Error::InvalidArgument("pattern needs at least one point".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let unit = [0.0, 0.0, 1.0, 1.0];
    let n = spec.n;
    let coords: Vec<[f64; 2]> = match &spec.kind {
        PatternKind::Homogeneous => (0..n).map(|_| uniform_in(&mut rng, &unit)).collect(),
        PatternKind::DenseSubregion { rect, fraction } => {
            check_rect(rect, "subregion")?;
            if !(0.0..=1.0).contains(fraction) {
                return Err(Error::InvalidArgument(format!("fraction must lie in [0, 1], got {fraction}")));
            }
            if area(rect) >= 1.0 && *fraction < 1.0 {
                return Err(Error::InvalidArgument("subregion leaves no room outside it".into()));
            }
            (0..n)
                .map(|_| {
                    if rng.random::<f64>() < *fraction {
                        uniform_in(&mut rng, rect)
                    } else {
                        uniform_ring(&mut rng, &unit, rect)
                    }
                })
                .collect()
        }
        PatternKind::NestedDensity { middle, inner, densities } => {
            check_rect(middle, "middle rectangle")?;
            check_rect(inner, "inner rectangle")?;
            let nested = |a: &[f64; 4], b: &[f64; 4]| a[0] <= b[0] && a[1] <= b[1] && a[2] >= b[2] && a[3] >= b[3];
            if !nested(middle, inner) || area(middle) >= 1.0 || area(inner) >= area(middle) {
                return Err(Error::InvalidArgument("rectangles must be strictly nested".into()));
            }
            if !densities.iter().all(|d| *d >= 0.0 && d.is_finite()) || densities.iter().sum::<f64>() <= 0.0 {
                return Err(Error::InvalidArgument(format!("invalid densities {densities:?}")));
            }
            let mass = [
                densities[0] * (1.0 - area(middle)),
                densities[1] * (area(middle) - area(inner)),
                densities[2] * area(inner),
            ];
            let total: f64 = mass.iter().sum();
            (0..n)
                .map(|_| {
                    let u = rng.random::<f64>() * total;
                    if u < mass[0] {
                        uniform_ring(&mut rng, &unit, middle)
                    } else if u < mass[0] + mass[1] {
                        uniform_ring(&mut rng, middle, inner)
                    } else {
                        uniform_in(&mut rng, inner)
                    }
                })
                .collect()
        }
        PatternKind::StripedGaps { stripes } => {
            let open = open_bands(stripes)?;
            let total: f64 = open.iter().map(|b| b[1] - b[0]).sum();
            (0..n)
                .map(|_| {
                    let x = rng.random::<f64>();
                    let mut u = rng.random::<f64>() * total;
                    let mut y = open[open.len() - 1][1];
                    for b in &open {
                        let w = b[1] - b[0];
                        if u < w {
                            y = b[0] + u;
                            break;
                        }
                        u -= w;
                    }
                    [x, y]
                })
                .collect()
        }
        PatternKind::CircularClusters { centers, radius, background } => {
            if centers.is_empty() || !centers.iter().all(|c| in_unit(c[0]) && in_unit(c[1])) {
                return Err(Error::InvalidArgument("cluster centers must be nonempty and inside the unit square".into()));
            }
            if !(*radius > 0.0 && *radius <= 1.0) || !(0.0..=1.0).contains(background) {
                return Err(Error::InvalidArgument(format!("invalid radius {radius} or background {background}")));
            }
            (0..n)
                .map(|_| {
                    if rng.random::<f64>() < *background {
                        return uniform_in(&mut rng, &unit);
                    }
                    let c = centers[rng.random_range(0..centers.len())];
                    loop {
                        let r = radius * rng.random::<f64>().sqrt();
                        let t = std::f64::consts::TAU * rng.random::<f64>();
                        let p = [c[0] + r * t.cos(), c[1] + r * t.sin()];
                        if in_unit(p[0]) && in_unit(p[1]) {
                            return p;
                        }
                    }
                })
                .collect()
        }
    };
    PointSet::new(coords)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(kind: PatternKind, n: usize) -> PatternSpec {
        PatternSpec { kind, n, seed: 17 }
    }

    #[test]
    fn every_kind_gives_n_points_in_the_square() {
        for name in ["homogeneous", "dense_subregion", "nested_density", "striped_gaps", "circular_clusters"] {
            let kind: PatternKind = name.parse().unwrap();
            assert_eq!(kind.name(), name);
            for n in [1, 4, 1000] {
                let pts = generate_pattern(&spec(kind.clone(), n)).unwrap();
                assert_eq!(pts.len(), n);
                assert!(pts.coords().iter().all(|p| in_unit(p[0]) && in_unit(p[1])), "{name}");
            }
        }
    }

    #[test]
    fn stripes_are_empty() {
        let kind = PatternKind::StripedGaps { stripes: vec![[0.4, 0.6]] };
        let pts = generate_pattern(&spec(kind, 5000)).unwrap();
        assert!(pts.coords().iter().all(|p| !(p[1] > 0.4 && p[1] < 0.6)));
        let full = PatternKind::StripedGaps { stripes: vec![[0.0, 0.5], [0.4, 1.0]] };
        assert!(generate_pattern(&spec(full, 10)).is_err());
    }

    #[test]
    fn subregion_fraction() {
        let rect = [0.0, 0.0, 0.5, 0.5];
        let kind = PatternKind::DenseSubregion { rect, fraction: 0.8 };
        let pts = generate_pattern(&spec(kind, 10_000)).unwrap();
        let inside = pts.coords().iter().filter(|p| contains(&rect, **p)).count() as f64 / 1e4;
        assert!((0.78..=0.82).contains(&inside), "{inside}");
    }

    #[test]
    fn nested_densities_are_ordered() {
        let kind = PatternKind::nested_density();
        let PatternKind::NestedDensity { middle, inner, .. } = kind.clone() else { unreachable!() };
        let pts = generate_pattern(&spec(kind, 20_000)).unwrap();
        let n_inner = pts.coords().iter().filter(|p| contains(&inner, **p)).count() as f64;
        let n_mid = pts.coords().iter().filter(|p| contains(&middle, **p)).count() as f64 - n_inner;
        let n_out = 20_000.0 - n_inner - n_mid;
        let d_inner = n_inner / area(&inner);
        let d_mid = n_mid / (area(&middle) - area(&inner));
        let d_out = n_out / (1.0 - area(&middle));
        assert!((d_inner / d_mid - 4.0).abs() < 0.4 && (d_mid / d_out - 4.0).abs() < 0.4);
    }

    #[test]
    fn deterministic_given_seed() {
        let a = generate_pattern(&spec(PatternKind::circular_clusters(), 300)).unwrap();
        let b = generate_pattern(&spec(PatternKind::circular_clusters(), 300)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_bad_shapes() {
        assert!(generate_pattern(&spec(PatternKind::Homogeneous, 0)).is_err());
        let bad = PatternKind::DenseSubregion { rect: [0.5, 0.0, 0.2, 1.0], fraction: 0.5 };
        assert!(generate_pattern(&spec(bad, 10)).is_err());
        assert!("clumped".parse::<PatternKind>().is_err());
    }
}
