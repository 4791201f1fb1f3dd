use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::kdtree::KdTree;
use super::points::PointSet;
use crate::error::{Error, Result};

/// Voronoi blocks. `assignment[i]` is the 1-based block id of point `i`;
/// block `b` is seeded by point `centers[b - 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockPartition {
    pub n_blocks: usize,
    pub assignment: Vec<usize>,
    pub centers: Vec<usize>,
}

impl BlockPartition {
    /// Member indices of each block, in block order.
    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.n_blocks];
        for (i, &b) in self.assignment.iter().enumerate() {
            out[b - 1].push(i);
        }
        out
    }
}

/// Default block count: one block per 500 points, at least one.
pub fn default_block_count(n: usize) -> usize {
    (n / 500).max(1)
}

/// Draws `n_blocks` distinct centers uniformly and assigns every point to
/// its nearest center (ties to the lower block id).
pub fn voronoi_partition(points: &PointSet, n_blocks: usize, seed: u64) -> Result<BlockPartition> {
    let n = points.len();
    if n_blocks == 0 || n_blocks > n {
        return Err(Error::InvalidArgument(format!("block count {n_blocks} must lie in 1..={n}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let centers = sample(&mut rng, n, n_blocks).into_vec();
    let center_coords: Vec<[f64; 2]> = centers.iter().map(|&c| points.get(c)).collect();
    let tree = KdTree::from_coords(&center_coords)?;
    let assignment = points.coords().iter().map(|&p| tree.nearest(p, 1)[0].index + 1).collect();
    Ok(BlockPartition { n_blocks, assignment, centers })
}
