//! Spatial indexing: kd-tree queries, max-min ordering, conditioning sets,
//! Voronoi blocks and de-clustering weights.

pub mod blocks;
pub mod kdtree;
pub mod ordering;
pub mod points;
pub mod weights;

pub use blocks::{default_block_count, voronoi_partition, BlockPartition};
pub use kdtree::{KdTree, Neighbor};
pub use ordering::{maxmin_order, nearest_to_centroid, neighbor_sets, vecchia_plan, VecchiaPlan};
pub use points::{dist, dist2, PointSet};
pub use weights::{decluster_weights, default_decluster_radius, weighted_subsample, DeclusterWeights};
