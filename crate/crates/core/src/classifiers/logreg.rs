//! L2-regularized logistic regression fitted by full-batch gradient descent.

use crate::error::{Error, Result};
use crate::relational::{one_hot_encode, Dataset, EncodedMatrix, OneHotLayout};

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct LogRegParams {
    pub l2: f64,
    pub learning_rate: f64,
    pub epochs: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogRegModel {
    weights: Vec<f64>,
    intercept: f64,
    l2: f64,
    grad_norm: f64,
    layout: Option<OneHotLayout>,
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + e^z)` without overflow.
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

/// Mean logistic loss plus `l2/2 ‖w‖²` and its gradient. `params` holds the
/// weights followed by the (unpenalized) intercept.
pub fn loss_and_gradient(data: &EncodedMatrix, params: &[f64], l2: f64) -> Result<(f64, Vec<f64>)> {
    let d = data.n_cols();
    if params.len() != d + 1 {
        return Err(Error::DimensionMismatch {
            expected: d + 1,
            actual: params.len(),
        });
    }
    let n = data.n_rows() as f64;
    let (w, b) = params.split_at(d);
    let mut loss = 0.0;
    let mut grad = vec![0.0; d + 1];
    for (r, &label) in data.labels().iter().enumerate() {
        let x = data.row(r);
        let z: f64 = x.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() + b[0];
        let y = label as f64;
        loss += softplus(z) - y * z;
        let resid = sigmoid(z) - y;
        for (g, &xi) in grad.iter_mut().zip(x) {
            *g += resid * xi;
        }
        grad[d] += resid;
    }
    loss /= n;
    grad.iter_mut().for_each(|g| *g /= n);
    loss += 0.5 * l2 * w.iter().map(|v| v * v).sum::<f64>();
    for (g, &wi) in grad.iter_mut().zip(w) {
        *g += l2 * wi;
    }
    Ok((loss, grad))
}

pub fn train_logreg(train: &EncodedMatrix, params: &LogRegParams) -> Result<LogRegModel> {
    let labels = train.labels();
    if !(labels.contains(&0) && labels.contains(&1)) {
        return Err(Error::DegenerateTraining("logistic regression needs both classes".into()));
    }
    if params.l2 < 0.0 || params.learning_rate <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "need l2 >= 0 and a positive learning rate, got {params:?}"
        )));
    }
    let d = train.n_cols();
    let mut theta = vec![0.0; d + 1];
    let mut grad_norm = f64::INFINITY;
    for _ in 0..params.epochs {
        let (_, g) = loss_and_gradient(train, &theta, params.l2)?;
        grad_norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        for (t, gi) in theta.iter_mut().zip(&g) {
            *t -= params.learning_rate * gi;
        }
    }
    let (_, g) = loss_and_gradient(train, &theta, params.l2)?;
    if params.epochs > 0 {
        grad_norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
    }
    if theta.iter().any(|v| !v.is_finite()) {
        return Err(Error::DegenerateTraining("gradient descent diverged".into()));
    }
    let intercept = theta.pop().unwrap();
    Ok(LogRegModel {
        weights: theta,
        intercept,
        l2: params.l2,
        grad_norm,
        layout: None,
    })
}

/// Fits on a categorical dataset through its one-hot encoding.
pub fn train_logreg_categorical(train: &Dataset, params: &LogRegParams) -> Result<LogRegModel> {
    let enc = one_hot_encode(train)?;
    let mut model = train_logreg(&enc, params)?;
    model.layout = Some(enc.layout().clone());
    Ok(model)
}

impl LogRegModel {
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn intercept(&self) -> f64 {
        self.intercept
    }

    pub fn l2(&self) -> f64 {
        self.l2
    }

    /// Gradient norm at the returned parameters.
    pub fn final_gradient_norm(&self) -> f64 {
        self.grad_norm
    }

    pub fn probability(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.weights.len() {
            return Err(Error::DimensionMismatch {
                expected: self.weights.len(),
                actual: x.len(),
            });
        }
        let z: f64 = x.iter().zip(&self.weights).map(|(a, b)| a * b).sum::<f64>() + self.intercept;
        Ok(sigmoid(z))
    }

    pub fn predict_encoded(&self, x: &[f64]) -> Result<u8> {
        Ok(u8::from(self.probability(x)? >= 0.5))
    }

    pub fn predict(&self, example: &[u32]) -> Result<u8> {
        let layout = self.layout.as_ref().ok_or_else(|| {
            Error::IncompatibleExample("model was trained on encoded rows; pass an encoded example".into())
        })?;
        self.predict_encoded(&layout.encode_row(example)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn separable_pair_is_sign_correct() {
        let m = EncodedMatrix::from_rows(vec![vec![1.0, 0.0], vec![0.0, 1.0]], vec![1, 0]).unwrap();
        let p = LogRegParams {
            l2: 0.1,
            learning_rate: 0.5,
            epochs: 500,
        };
        let model = train_logreg(&m, &p).unwrap();
        assert_eq!(model.predict_encoded(&[1.0, 0.0]).unwrap(), 1);
        assert_eq!(model.predict_encoded(&[0.0, 1.0]).unwrap(), 0);
        assert!(model.weights().iter().all(|w| w.is_finite()));
        assert!(model.final_gradient_norm() < 1e-3);
    }

    #[test]
    fn gradient_matches_central_differences() {
        let m = EncodedMatrix::from_rows(
            vec![vec![1.0, 0.0, 1.0], vec![0.0, 1.0, 1.0], vec![1.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]],
            vec![1, 0, 1, 0],
        )
        .unwrap();
        let theta = [0.3, -0.7, 1.1, 0.2];
        let (_, g) = loss_and_gradient(&m, &theta, 0.05).unwrap();
        let h = 1e-6;
        for k in 0..theta.len() {
            let mut up = theta;
            let mut dn = theta;
            up[k] += h;
            dn[k] -= h;
            let fd = (loss_and_gradient(&m, &up, 0.05).unwrap().0 - loss_and_gradient(&m, &dn, 0.05).unwrap().0) / (2.0 * h);
            assert!((fd - g[k]).abs() <= 1e-5 * g[k].abs().max(1e-3), "{k}: {fd} vs {}", g[k]);
        }
    }

    #[test]
    fn single_class_rejected() {
        let m = EncodedMatrix::from_rows(vec![vec![1.0]], vec![0]).unwrap();
        let p = LogRegParams {
            l2: 0.0,
            learning_rate: 0.1,
            epochs: 1,
        };
        assert!(matches!(train_logreg(&m, &p), Err(Error::DegenerateTraining(_))));
    }
}
