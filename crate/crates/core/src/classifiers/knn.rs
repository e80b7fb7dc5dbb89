//! 1-nearest-neighbor over one-hot categorical rows.

use crate::error::{Error, Result};
use crate::relational::Dataset;

/// Memorized training rows; distance is the squared Euclidean distance of
/// the one-hot encodings, i.e. twice the number of disagreeing features.
#[derive(Debug, Clone, PartialEq)]
pub struct NearestNeighbor {
    rows: Vec<Vec<u32>>,
    labels: Vec<u8>,
    domain_sizes: Vec<usize>,
}

pub fn one_hot_sq_distance(a: &[u32], b: &[u32]) -> usize {
    2 * a.iter().zip(b).filter(|(x, y)| x != y).count()
}

impl NearestNeighbor {
    pub fn fit(train: &Dataset) -> Result<Self> {
        if train.n_rows() == 0 {
            return Err(Error::Empty("1-NN needs at least one training row".into()));
        }
        Ok(Self {
            rows: train.rows(),
            labels: train.labels().to_vec(),
            domain_sizes: train.domain_sizes(),
        })
    }

    /// Index of the nearest training row; ties go to the lowest index.
    pub fn nearest(&self, example: &[u32]) -> Result<usize> {
        if example.len() != self.domain_sizes.len() {
            return Err(Error::DimensionMismatch {
                expected: self.domain_sizes.len(),
                actual: example.len(),
            });
        }
        if let Some(f) = (0..example.len()).find(|&f| example[f] as usize >= self.domain_sizes[f]) {
            return Err(Error::IncompatibleExample(format!(
                "feature {f} code {} is outside its domain",
                example[f]
            )));
        }
        let mut best = (usize::MAX, 0);
        for (i, row) in self.rows.iter().enumerate() {
            let d = one_hot_sq_distance(row, example);
            if d < best.0 {
                best = (d, i);
                if d == 0 {
                    break;
                }
            }
        }
        Ok(best.1)
    }

    pub fn predict(&self, example: &[u32]) -> Result<u8> {
        Ok(self.labels[self.nearest(example)?])
    }
}
