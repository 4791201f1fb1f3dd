use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::kdtree::{KdTree, Neighbor};
use super::points::{dist2, PointSet};
use crate::error::{Error, Result};

/// Prefix sizes at or below this use a linear scan instead of a tree.
const BRUTE_PREFIX: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq)]
struct Pending {
    d2: f64,
    index: usize,
}

impl Eq for Pending {}

impl Ord for Pending {
    // Max-heap on distance; among equal distances the smaller index is greater.
    fn cmp(&self, other: &Self) -> Ordering {
        self.d2.total_cmp(&other.d2).then(other.index.cmp(&self.index))
    }
}

impl PartialOrd for Pending {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Index of the point nearest the centroid, ties to the smallest index.
pub fn nearest_to_centroid(points: &PointSet) -> usize {
    let c = points.centroid();
    let mut best = (f64::INFINITY, 0);
    for (i, &p) in points.coords().iter().enumerate() {
        let d = dist2(p, c);
        if d < best.0 {
            best = (d, i);
        }
    }
    best.1
}

/// Max-min ordering: start nearest the centroid, then repeatedly take the
/// point farthest from everything already ordered (ties to the smallest
/// original index). Exact for every n; a lazy max-heap plus kd-tree radius
/// updates keeps it near O(n log n).
pub fn maxmin_order(points: &PointSet) -> Vec<usize> {
    let n = points.len();
    let coords = points.coords();
    let first = nearest_to_centroid(points);
    let mut order = Vec::with_capacity(n);
    let mut done = vec![false; n];
    let mut d = vec![f64::INFINITY; n];
    let mut heap = BinaryHeap::with_capacity(2 * n);
    let tree = KdTree::new(points);

    let mut next = Some((first, f64::INFINITY));
    while let Some((i, radius2)) = next.take() {
        order.push(i);
        done[i] = true;
        tree.for_each_within(coords[i], radius2, |q, d2| {
            if !done[q] && d2 < d[q] {
                d[q] = d2;
                heap.push(Pending { d2, index: q });
            }
        });
        if order.len() == n {
            break;
        }
        while let Some(top) = heap.pop() {
            // Entries superseded by a later, smaller distance are stale.
            if !done[top.index] && top.d2 == d[top.index] {
                next = Some((top.index, top.d2));
                break;
            }
        }
    }
    order
}

/// Ordering plus, for each ordered position `i`, the conditioning set
/// `g(i)` of earlier positions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VecchiaPlan {
    permutation: Vec<usize>,
    offsets: Vec<usize>,
    flat: Vec<usize>,
    m: usize,
}

impl VecchiaPlan {
    pub fn len(&self) -> usize {
        self.permutation.len()
    }

    pub fn is_empty(&self) -> bool {
        self.permutation.is_empty()
    }

    pub fn m(&self) -> usize {
        self.m
    }

    /// `permutation()[i]` is the original index of the point at ordered position `i`.
    pub fn permutation(&self) -> &[usize] {
        &self.permutation
    }

    /// Earlier ordered positions conditioned on by position `i`, ascending.
    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.flat[self.offsets[i]..self.offsets[i + 1]]
    }

    pub fn max_set_size(&self) -> usize {
        self.offsets.windows(2).map(|w| w[1] - w[0]).max().unwrap_or(0)
    }
}

pub(crate) fn check_permutation(order: &[usize], n: usize) -> Result<()> {
    if order.len() != n {
        return Err(Error::DimensionMismatch { expected: n, actual: order.len() });
    }
    let mut seen = vec![false; n];
    for &i in order {
        if i >= n || std::mem::replace(&mut seen[i], true) {
            return Err(Error::InvalidArgument(format!("ordering is not a permutation of 0..{n}")));
        }
    }
    Ok(())
}

fn brute_predecessors(oc: &[[f64; 2]], r: usize, k: usize) -> Vec<usize> {
    let mut cands: Vec<Neighbor> = (0..r).map(|j| Neighbor { index: j, dist2: dist2(oc[j], oc[r]) }).collect();
    if k < cands.len() {
        cands.select_nth_unstable(k);
        cands.truncate(k);
    }
    let mut out: Vec<usize> = cands.into_iter().map(|c| c.index).collect();
    out.sort_unstable();
    out
}

/// Builds conditioning sets: `g(i)` holds the `min(i, m)` earlier positions
/// nearest to position `i` (distance ties to the earlier position), sorted
/// ascending.
pub fn neighbor_sets(points: &PointSet, order: &[usize], m: usize) -> Result<VecchiaPlan> {
    let n = points.len();
    check_permutation(order, n)?;
    let oc: Vec<[f64; 2]> = order.iter().map(|&i| points.get(i)).collect();
    let mut sets: Vec<Vec<usize>> = Vec::with_capacity(n);

    let mut r = 0;
    while r < n {
        // Ranks sharing one prefix tree: those with the same next power of two.
        let size = r.max(1).next_power_of_two();
        let end = (size + 1).min(n);
        let band: Vec<Vec<usize>> = if size <= BRUTE_PREFIX {
            (r..end).map(|i| if i <= m { (0..i).collect() } else { brute_predecessors(&oc, i, m) }).collect()
        } else {
            let tree = KdTree::from_coords(&oc[..size.min(n)])?;
            (r..end)
                .into_par_iter()
                .map(|i| {
                    if i <= m {
                        return (0..i).collect();
                    }
                    let mut g: Vec<usize> =
                        tree.nearest_filtered(oc[i], m, |j| j < i).into_iter().map(|c| c.index).collect();
                    g.sort_unstable();
                    g
                })
                .collect()
        };
        sets.extend(band);
        r = end;
    }

    let mut offsets = Vec::with_capacity(n + 1);
    offsets.push(0);
    let mut flat = Vec::with_capacity(sets.iter().map(Vec::len).sum());
    for g in sets {
        flat.extend(g);
        offsets.push(flat.len());
    }
    Ok(VecchiaPlan { permutation: order.to_vec(), offsets, flat, m })
}

/// Max-min ordering followed by nearest-predecessor conditioning sets.
pub fn vecchia_plan(points: &PointSet, m: usize) -> VecchiaPlan {
    let order = maxmin_order(points);
    neighbor_sets(points, &order, m).expect("max-min ordering is a permutation")
}
