use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::points::{dist2, PointSet};
use crate::error::{Error, Result};

pub const LEAF_SIZE: usize = 16;

const NO_CHILD: u32 = u32::MAX;

#[derive(Debug, Clone)]
struct Node {
    start: u32,
    end: u32,
    left: u32,
    right: u32,
    bbox: [f64; 4],
}

/// A neighbor returned by a query: index into the indexed points and the
/// squared distance to the query.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    pub index: usize,
    pub dist2: f64,
}

impl Eq for Neighbor {}

impl Ord for Neighbor {
    fn cmp(&self, other: &Self) -> Ordering {
        self.dist2.total_cmp(&other.dist2).then(self.index.cmp(&other.index))
    }
}

impl PartialOrd for Neighbor {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Balanced 2-d tree. Owns a permuted copy of the coordinates so leaves are
/// contiguous in memory.
#[derive(Debug, Clone)]
pub struct KdTree {
    coords: Vec<[f64; 2]>,
    ids: Vec<usize>,
    nodes: Vec<Node>,
}

fn bbox_of(items: &[([f64; 2], usize)]) -> [f64; 4] {
    items.iter().map(|t| t.0).fold(
        [f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY],
        |b, c| [b[0].min(c[0]), b[1].min(c[1]), b[2].max(c[0]), b[3].max(c[1])],
    )
}

#[inline]
fn bbox_dist2(b: &[f64; 4], q: [f64; 2]) -> f64 {
    let dx = (b[0] - q[0]).max(0.0).max(q[0] - b[2]);
    let dy = (b[1] - q[1]).max(0.0).max(q[1] - b[3]);
    dx * dx + dy * dy
}

impl KdTree {
    pub fn new(points: &PointSet) -> Self {
        Self::from_coords(points.coords()).expect("point sets are non-empty")
    }

    pub fn from_coords(coords: &[[f64; 2]]) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::EmptyPointSet);
        }
        let mut items: Vec<([f64; 2], usize)> = coords.iter().copied().zip(0..).collect();
        let mut nodes = Vec::with_capacity(2 * coords.len() / LEAF_SIZE + 1);
        build(&mut items, 0, &mut nodes);
        let (coords, ids) = items.into_iter().unzip();
        Ok(Self { coords, ids, nodes })
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    /// The `k` nearest points, ordered by (distance, index).
    pub fn nearest(&self, query: [f64; 2], k: usize) -> Vec<Neighbor> {
        self.nearest_filtered(query, k, |_| true)
    }

    /// The `k` nearest points among those accepted by `keep`, ordered by
    /// (distance, index).
    pub fn nearest_filtered<F: Fn(usize) -> bool>(&self, query: [f64; 2], k: usize, keep: F) -> Vec<Neighbor> {
        if k == 0 {
            return Vec::new();
        }
        let mut heap = BinaryHeap::with_capacity(k + 1);
        self.knn(0, query, k, &keep, &mut heap);
        heap.into_sorted_vec()
    }

    fn knn<F: Fn(usize) -> bool>(&self, node: usize, q: [f64; 2], k: usize, keep: &F, heap: &mut BinaryHeap<Neighbor>) {
        let nd = &self.nodes[node];
        if nd.left == NO_CHILD {
            for j in nd.start as usize..nd.end as usize {
                let id = self.ids[j];
                if !keep(id) {
                    continue;
                }
                let cand = Neighbor { index: id, dist2: dist2(self.coords[j], q) };
                if heap.len() < k {
                    heap.push(cand);
                } else if cand < *heap.peek().expect("heap is full") {
                    heap.pop();
                    heap.push(cand);
                }
            }
            return;
        }
        let (l, r) = (nd.left as usize, nd.right as usize);
        let dl = bbox_dist2(&self.nodes[l].bbox, q);
        let dr = bbox_dist2(&self.nodes[r].bbox, q);
        let order = if dl <= dr { [(l, dl), (r, dr)] } else { [(r, dr), (l, dl)] };
        for (child, d) in order {
            // Equal distances may still win on index, so only strictly farther boxes are pruned.
            if heap.len() < k || d <= heap.peek().expect("heap is full").dist2 {
                self.knn(child, q, k, keep, heap);
            }
        }
    }

    /// Indices of all points within `radius` (inclusive), in no particular order.
    pub fn within_radius(&self, query: [f64; 2], radius: f64) -> Vec<usize> {
        let mut out = Vec::new();
        self.for_each_within(query, radius * radius, |i, _| out.push(i));
        out
    }

    pub fn count_within(&self, query: [f64; 2], radius: f64) -> usize {
        let mut n = 0;
        self.for_each_within(query, radius * radius, |_, _| n += 1);
        n
    }

    /// Calls `f(index, dist2)` for each point with squared distance ≤ `r2`.
    pub fn for_each_within<F: FnMut(usize, f64)>(&self, query: [f64; 2], r2: f64, mut f: F) {
        let mut stack = vec![0usize];
        while let Some(node) = stack.pop() {
            let nd = &self.nodes[node];
            if bbox_dist2(&nd.bbox, query) > r2 {
                continue;
            }
            if nd.left == NO_CHILD {
                for j in nd.start as usize..nd.end as usize {
                    let d = dist2(self.coords[j], query);
                    if d <= r2 {
                        f(self.ids[j], d);
                    }
                }
            } else {
                stack.push(nd.right as usize);
                stack.push(nd.left as usize);
            }
        }
    }
}

fn build(items: &mut [([f64; 2], usize)], offset: usize, nodes: &mut Vec<Node>) -> u32 {
    let bbox = bbox_of(items);
    let id = nodes.len();
    nodes.push(Node {
        start: offset as u32,
        end: (offset + items.len()) as u32,
        left: NO_CHILD,
        right: NO_CHILD,
        bbox,
    });
    if items.len() <= LEAF_SIZE {
        return id as u32;
    }
    let axis = usize::from(bbox[3] - bbox[1] > bbox[2] - bbox[0]);
    let mid = items.len() / 2;
    items.select_nth_unstable_by(mid, |a, b| a.0[axis].total_cmp(&b.0[axis]).then(a.1.cmp(&b.1)));
    let (lo, hi) = items.split_at_mut(mid);
    let left = build(lo, offset, nodes);
    let right = build(hi, offset + mid, nodes);
    nodes[id].left = left;
    nodes[id].right = right;
    id as u32
}
