//! Categorical Naive Bayes with Laplace smoothing.

use crate::error::{Error, Result};
use crate::relational::Dataset;

/// Pseudocount added to every frequency count.
pub const LAPLACE: f64 = 1.0;

#[derive(Debug, Clone, PartialEq)]
pub struct NbModel {
    prior: [f64; 2],
    /// `cond[f][y][v] = P(X_f = v | Y = y)`.
    cond: Vec<[Vec<f64>; 2]>,
}

pub fn train_nb(train: &Dataset) -> Result<NbModel> {
    let labels = train.labels();
    let mut n_class = [0usize; 2];
    for &y in labels {
        n_class[y as usize] += 1;
    }
    if n_class[0] == 0 || n_class[1] == 0 {
        return Err(Error::DegenerateTraining("Naive Bayes needs both classes".into()));
    }
    let n = labels.len() as f64;
    let cond = train
        .columns()
        .iter()
        .map(|col| {
            let k = col.domain.len();
            let mut counts = [vec![0usize; k], vec![0usize; k]];
            for (&v, &y) in col.codes.iter().zip(labels) {
                counts[y as usize][v as usize] += 1;
            }
            let table = |y: usize| {
                let denom = n_class[y] as f64 + LAPLACE * k as f64;
                counts[y].iter().map(|&c| (c as f64 + LAPLACE) / denom).collect()
            };
            [table(0), table(1)]
        })
        .collect();
    Ok(NbModel {
        prior: [n_class[0] as f64 / n, n_class[1] as f64 / n],
        cond,
    })
}

impl NbModel {
    pub fn prior(&self) -> [f64; 2] {
        self.prior
    }

    /// `P(X_f = v | Y = y)`.
    pub fn conditional(&self, feature: usize, class: u8, value: u32) -> f64 {
        self.cond[feature][class as usize][value as usize]
    }

    pub fn n_features(&self) -> usize {
        self.cond.len()
    }

    fn check(&self, example: &[u32]) -> Result<()> {
        if example.len() != self.cond.len() {
            return Err(Error::DimensionMismatch {
                expected: self.cond.len(),
                actual: example.len(),
            });
        }
        if let Some(f) = (0..example.len()).find(|&f| example[f] as usize >= self.cond[f][0].len()) {
            return Err(Error::IncompatibleExample(format!(
                "feature {f} code {} is outside its domain",
                example[f]
            )));
        }
        Ok(())
    }

    fn log_joint(&self, example: &[u32]) -> [f64; 2] {
        let mut s = [self.prior[0].ln(), self.prior[1].ln()];
        for (f, &v) in example.iter().enumerate() {
            for (y, acc) in s.iter_mut().enumerate() {
                *acc += self.cond[f][y][v as usize].ln();
            }
        }
        s
    }

    /// Normalized class posterior.
    pub fn posterior(&self, example: &[u32]) -> Result<[f64; 2]> {
        self.check(example)?;
        let s = self.log_joint(example);
        let m = s[0].max(s[1]);
        let e = [(s[0] - m).exp(), (s[1] - m).exp()];
        let z = e[0] + e[1];
        Ok([e[0] / z, e[1] / z])
    }

    /// Maximum a posteriori class; ties go to 0.
    pub fn predict(&self, example: &[u32]) -> Result<u8> {
        self.check(example)?;
        let s = self.log_joint(example);
        Ok(u8::from(s[1] > s[0]))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::relational::fixtures::domain;
    use crate::relational::{Column, FeatureRole};

    #[test]
    fn laplace_counts() {
        // Y = 1 on rows 2, 3, both with X = 1
        let d = Dataset::new(
            vec![Column::new("x", domain("x", 2), vec![0, 1, 1, 1]).unwrap()],
            vec![FeatureRole::Home],
            vec![0, 0, 1, 1],
        )
        .unwrap();
        let m = train_nb(&d).unwrap();
        assert_eq!(m.conditional(0, 1, 1), 0.75);
        assert_eq!(m.conditional(0, 1, 0), 0.25);
        assert_eq!(m.conditional(0, 0, 1), 0.5);
        assert_eq!(m.prior(), [0.5, 0.5]);
        for f in 0..m.n_features() {
            for y in 0..2 {
                let s: f64 = m.cond[f][y].iter().sum();
                assert!((s - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn single_class_rejected() {
        let d = Dataset::new(
            vec![Column::new("x", domain("x", 2), vec![0, 1]).unwrap()],
            vec![FeatureRole::Home],
            vec![1, 1],
        )
        .unwrap();
        assert!(matches!(train_nb(&d), Err(Error::DegenerateTraining(_))));
    }

    #[test]
    fn ties_predict_zero() {
        let d = Dataset::new(
            vec![Column::new("x", domain("x", 2), vec![0, 1, 0, 1]).unwrap()],
            vec![FeatureRole::Home],
            vec![0, 0, 1, 1],
        )
        .unwrap();
        let m = train_nb(&d).unwrap();
        assert_eq!(m.posterior(&[0]).unwrap(), [0.5, 0.5]);
        assert_eq!(m.predict(&[0]).unwrap(), 0);
        assert!(m.predict(&[2]).is_err());
    }
}
