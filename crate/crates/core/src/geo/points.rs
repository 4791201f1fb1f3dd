use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Squared Euclidean distance.
#[inline]
pub fn dist2(a: [f64; 2], b: [f64; 2]) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    dx * dx + dy * dy
}

#[inline]
pub fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    dist2(a, b).sqrt()
}

/// A non-empty set of planar locations with finite coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointSet {
    coords: Vec<[f64; 2]>,
}

impl PointSet {
    pub fn new(coords: Vec<[f64; 2]>) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::EmptyPointSet);
        }
        if let Some(i) = coords.iter().position(|c| !(c[0].is_finite() && c[1].is_finite())) {
            return Err(Error::InvalidArgument(format!("point {i} has a non-finite coordinate")));
        }
        Ok(Self { coords })
    }

    pub fn from_xy(x: &[f64], y: &[f64]) -> Result<Self> {
        if x.len() != y.len() {
            return Err(Error::DimensionMismatch { expected: x.len(), actual: y.len() });
        }
        Self::new(x.iter().zip(y).map(|(&a, &b)| [a, b]).collect())
    }

    pub fn len(&self) -> usize {
        self.coords.len()
    }

    /// Always false; kept for API symmetry with collections.
    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn coords(&self) -> &[[f64; 2]] {
        &self.coords
    }

    pub fn get(&self, i: usize) -> [f64; 2] {
        self.coords[i]
    }

    pub fn centroid(&self) -> [f64; 2] {
        let n = self.coords.len() as f64;
        let (sx, sy) = self.coords.iter().fold((0.0, 0.0), |(sx, sy), c| (sx + c[0], sy + c[1]));
        [sx / n, sy / n]
    }

    /// `[min_x, min_y, max_x, max_y]`.
    pub fn bounding_box(&self) -> [f64; 4] {
        self.coords.iter().fold(
            [f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY],
            |b, c| [b[0].min(c[0]), b[1].min(c[1]), b[2].max(c[0]), b[3].max(c[1])],
        )
    }

    pub fn diagonal(&self) -> f64 {
        let b = self.bounding_box();
        ((b[2] - b[0]).powi(2) + (b[3] - b[1]).powi(2)).sqrt()
    }

    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        if let Some(&bad) = indices.iter().find(|&&i| i >= self.len()) {
            return Err(Error::InvalidArgument(format!("index {bad} out of range for {} points", self.len())));
        }
        Self::new(indices.iter().map(|&i| self.coords[i]).collect())
    }
}
