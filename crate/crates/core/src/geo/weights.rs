use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::kdtree::KdTree;
use super::points::PointSet;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeclusterWeights {
    pub weights: Vec<f64>,
    pub radius: f64,
}

/// Default neighborhood radius: 5% of the bounding-box diagonal.
pub fn default_decluster_radius(points: &PointSet) -> f64 {
    let d = points.diagonal();
    if d > 0.0 {
        0.05 * d
    } else {
        1.0
    }
}

/// Weight of each point is the inverse of how many points (itself
/// included) lie within `radius`, normalized to sum to one.
pub fn decluster_weights(points: &PointSet, radius: f64) -> Result<DeclusterWeights> {
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(Error::InvalidArgument(format!("decluster radius must be positive, got {radius}")));
    }
    let tree = KdTree::new(points);
    let raw: Vec<f64> =
        points.coords().par_iter().map(|&p| 1.0 / tree.count_within(p, radius) as f64).collect();
    let total: f64 = raw.iter().sum();
    Ok(DeclusterWeights { weights: raw.into_iter().map(|w| w / total).collect(), radius })
}

/// Binary indexed tree over nonnegative weights.
struct Fenwick {
    tree: Vec<f64>,
}

impl Fenwick {
    fn new(values: &[f64]) -> Self {
        let n = values.len();
        let mut tree = vec![0.0; n + 1];
        for (i, &v) in values.iter().enumerate() {
            let mut j = i + 1;
            tree[j] += v;
            j += j & j.wrapping_neg();
            if j <= n {
                let carry = tree[i + 1];
                tree[j] += carry;
            }
        }
        Self { tree }
    }

    fn add(&mut self, i: usize, delta: f64) {
        let mut j = i + 1;
        while j < self.tree.len() {
            self.tree[j] += delta;
            j += j & j.wrapping_neg();
        }
    }

    fn total(&self) -> f64 {
        let mut j = self.tree.len() - 1;
        let mut s = 0.0;
        while j > 0 {
            s += self.tree[j];
            j &= j - 1;
        }
        s
    }

    /// Smallest index whose inclusive prefix sum exceeds `u`.
    fn find(&self, mut u: f64) -> usize {
        let n = self.tree.len() - 1;
        let mut pos = 0;
        let mut step = n.next_power_of_two();
        while step > 0 {
            let next = pos + step;
            if next <= n && self.tree[next] <= u {
                pos = next;
                u -= self.tree[next];
            }
            step >>= 1;
        }
        pos.min(n - 1)
    }
}

/// Sequential weighted sampling without replacement: each draw picks a
/// remaining index with probability proportional to its weight.
pub fn weighted_subsample(weights: &DeclusterWeights, size: usize, seed: u64) -> Result<Vec<usize>> {
    let w = &weights.weights;
    let n = w.len();
    if size > n {
        return Err(Error::InvalidArgument(format!("subsample size {size} exceeds {n} points")));
    }
    if w.iter().any(|&v| !(v >= 0.0 && v.is_finite())) {
        return Err(Error::InvalidArgument("weights must be finite and nonnegative".into()));
    }
    let mut remaining = w.clone();
    let mut fenwick = Fenwick::new(w);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(size);
    for _ in 0..size {
        let total = fenwick.total();
        let mut pick = if total > 0.0 { fenwick.find(rng.random::<f64>() * total) } else { n };
        if pick >= n || remaining[pick] <= 0.0 {
            // Rounding landed on an exhausted slot, or all remaining weight is zero.
            pick = nearest_available(&remaining, &out, pick.min(n - 1));
        }
        fenwick.add(pick, -remaining[pick]);
        remaining[pick] = 0.0;
        out.push(pick);
    }
    Ok(out)
}

fn nearest_available(remaining: &[f64], taken: &[usize], around: usize) -> usize {
    if let Some(i) = (around..remaining.len()).chain((0..around).rev()).find(|&i| remaining[i] > 0.0) {
        return i;
    }
    // Only zero-weight points remain: take the lowest index not yet drawn.
    let mut used = vec![false; remaining.len()];
    for &t in taken {
        used[t] = true;
    }
    used.iter().position(|&u| !u).expect("size ≤ n leaves an index")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn weights(w: Vec<f64>) -> DeclusterWeights {
        DeclusterWeights { weights: w, radius: 1.0 }
    }

    #[test]
    fn isolated_pair() {
        let p = PointSet::new(vec![[0.0, 0.0], [5.0, 0.0]]).unwrap();
        assert_eq!(decluster_weights(&p, 1.0).unwrap().weights, vec![0.5, 0.5]);
    }

    #[test]
    fn cluster_plus_loner() {
        let p = PointSet::new(vec![[0.0, 0.0], [0.1, 0.0], [0.0, 0.1], [9.0, 9.0]]).unwrap();
        let w = decluster_weights(&p, 0.5).unwrap().weights;
        let want = [1.0 / 6.0, 1.0 / 6.0, 1.0 / 6.0, 0.5];
        for (a, b) in w.iter().zip(want) {
            assert!((a - b).abs() < 1e-15);
        }
        assert!(decluster_weights(&p, 0.0).is_err());
    }

    #[test]
    fn fenwick_prefix_search() {
        let f = Fenwick::new(&[0.1, 0.0, 0.3, 0.6, 0.0]);
        assert!((f.total() - 1.0).abs() < 1e-15);
        assert_eq!(f.find(0.05), 0);
        assert_eq!(f.find(0.1), 2);
        assert_eq!(f.find(0.39), 2);
        assert_eq!(f.find(0.41), 3);
        assert_eq!(f.find(0.999), 3);
        for n in 1..40 {
            let vals: Vec<f64> = (0..n).map(|i| f64::from(i % 4)).collect();
            let f = Fenwick::new(&vals);
            assert_eq!(f.total(), vals.iter().sum::<f64>());
        }
    }

    #[test]
    fn full_draw_returns_every_index() {
        let w = weights(vec![0.2, 0.0, 0.5, 0.3, 0.0]);
        let mut s = weighted_subsample(&w, 5, 1).unwrap();
        s.sort_unstable();
        assert_eq!(s, vec![0, 1, 2, 3, 4]);
        assert!(weighted_subsample(&w, 6, 1).is_err());
    }

    #[test]
    fn deterministic_and_distinct() {
        let w = weights((1..=200).map(f64::from).collect());
        let a = weighted_subsample(&w, 120, 9).unwrap();
        assert_eq!(a, weighted_subsample(&w, 120, 9).unwrap());
        let mut s = a.clone();
        s.sort_unstable();
        s.dedup();
        assert_eq!(s.len(), 120);
    }

    #[test]
    fn dominant_weight_is_drawn_first() {
        let mut v = vec![0.001 / 99.0; 100];
        v[37] = 0.999;
        let w = weights(v);
        let hits = (0..10_000).filter(|&s| weighted_subsample(&w, 1, s).unwrap()[0] == 37).count();
        assert!(hits >= 9_900, "{hits}");
    }

    #[test]
    fn first_draw_frequencies_follow_weights() {
        let w = weights(vec![0.1, 0.2, 0.3, 0.4]);
        let mut counts = [0usize; 4];
        for s in 0..20_000 {
            counts[weighted_subsample(&w, 1, s).unwrap()[0]] += 1;
        }
        for (c, p) in counts.iter().zip([0.1, 0.2, 0.3, 0.4]) {
            let freq = *c as f64 / 20_000.0;
            // Five binomial standard errors.
            assert!((freq - p).abs() < 5.0 * (p * (1.0 - p) / 20_000.0f64).sqrt(), "{counts:?}");
        }
    }
}
