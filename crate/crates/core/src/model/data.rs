use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geo::PointSet;
use crate::numerics::{cholesky, DenseMatrix};

/// Mean structure: zero, constant, or linear in the coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MeanSpec {
    #[default]
    Zero,
    Constant,
    Linear,
}

impl MeanSpec {
    pub fn n_cols(&self) -> usize {
        match self {
            MeanSpec::Zero => 0,
            MeanSpec::Constant => 1,
            MeanSpec::Linear => 3,
        }
    }

    /// Design row for one location.
    pub fn row(&self, p: [f64; 2]) -> Vec<f64> {
        match self {
            MeanSpec::Zero => vec![],
            MeanSpec::Constant => vec![1.0],
            MeanSpec::Linear => vec![1.0, p[0], p[1]],
        }
    }
}

impl std::str::FromStr for MeanSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "zero" => Ok(MeanSpec::Zero),
            "constant" => Ok(MeanSpec::Constant),
            "linear" => Ok(MeanSpec::Linear),
            other => Err(Error::InvalidArgument(format!("unknown mean spec '{other}'"))),
        }
    }
}

impl std::fmt::Display for MeanSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            MeanSpec::Zero => "zero",
            MeanSpec::Constant => "constant",
            MeanSpec::Linear => "linear",
        })
    }
}

/// `n × P` design matrix implied by the mean spec.
pub fn design_matrix(points: &PointSet, mean: MeanSpec) -> DenseMatrix {
    let p = mean.n_cols();
    let mut data = Vec::with_capacity(points.len() * p);
    for &c in points.coords() {
        data.extend(mean.row(c));
    }
    DenseMatrix::new(points.len(), p, data).expect("coordinates are finite")
}

/// Locations, responses and mean structure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub points: PointSet,
    pub responses: Vec<f64>,
    pub mean: MeanSpec,
}

impl Dataset {
    pub fn new(points: PointSet, responses: Vec<f64>, mean: MeanSpec) -> Result<Self> {
        if responses.len() != points.len() {
            return Err(Error::DimensionMismatch { expected: points.len(), actual: responses.len() });
        }
        if let Some(i) = responses.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!("response {i} is not finite")));
        }
        if mean.n_cols() > 0 {
            let x = design_matrix(&points, mean);
            let gram = x.transpose().matmul(&x)?;
            if points.len() < mean.n_cols() || cholesky(&gram).is_err() {
                return Err(Error::InvalidArgument(format!("{mean} mean design is rank deficient for these sites")));
            }
        }
        Ok(Self { points, responses, mean })
    }

    pub fn len(&self) -> usize {
        self.responses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.responses.is_empty()
    }

    pub fn design(&self) -> DenseMatrix {
        design_matrix(&self.points, self.mean)
    }

    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        let points = self.points.subset(indices)?;
        let responses = indices.iter().map(|&i| self.responses[i]).collect();
        Self::new(points, responses, self.mean)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn design_examples() {
        let pts = PointSet::new(vec![[0.0, 0.0], [1.0, 2.0], [3.0, 1.0]]).unwrap();
        assert_eq!(design_matrix(&pts, MeanSpec::Zero).cols(), 0);
        assert_eq!(design_matrix(&pts, MeanSpec::Constant).as_slice(), &[1.0, 1.0, 1.0]);
        let two = PointSet::new(vec![[0.0, 0.0], [1.0, 2.0]]).unwrap();
        assert_eq!(design_matrix(&two, MeanSpec::Linear).as_slice(), &[1.0, 0.0, 0.0, 1.0, 1.0, 2.0]);
    }

    #[test]
    fn dataset_validation() {
        let pts = PointSet::new(vec![[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]]).unwrap();
        assert!(Dataset::new(pts.clone(), vec![1.0, 2.0], MeanSpec::Zero).is_err());
        assert!(Dataset::new(pts.clone(), vec![1.0, f64::NAN, 2.0], MeanSpec::Zero).is_err());
        assert!(Dataset::new(pts.clone(), vec![1.0, 2.0, 3.0], MeanSpec::Constant).is_ok());
        // Collinear sites cannot support a planar trend.
        assert!(Dataset::new(pts, vec![1.0, 2.0, 3.0], MeanSpec::Linear).is_err());
    }

    #[test]
    fn mean_spec_parsing() {
        assert_eq!("Linear".parse::<MeanSpec>().unwrap(), MeanSpec::Linear);
        assert!("quadratic".parse::<MeanSpec>().is_err());
        assert_eq!(MeanSpec::Constant.to_string(), "constant");
    }
}
