//! Kernel SVMs trained by sequential minimal optimization.
//!
//! The solver keeps the full gradient of the dual and picks working pairs by
//! maximal violation with second-order gain, so it converges to the stated
//! KKT tolerance rather than stopping after a fixed number of quiet passes.
//!
//! For one-hot encoded categorical rows both the dot product and the squared
//! distance depend only on how many features two rows agree on, so
//! [`CategoricalGram`] stores match counts and evaluates any kernel through a
//! small lookup table.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::relational::{Dataset, EncodedMatrix, OneHotLayout};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum KernelKind {
    Linear,
    Quadratic,
    Rbf,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub kind: KernelKind,
    /// Misclassification cost.
    pub c: f64,
    /// Bandwidth (RBF) or scale (quadratic); ignored by the linear kernel.
    pub gamma: f64,
    /// Additive constant of the quadratic kernel.
    pub coef0: f64,
    /// Evaluate the quadratic kernel as `(-gamma * u.v)^2`.
    pub strict_quadratic: bool,
}

impl KernelSpec {
    pub fn linear(c: f64) -> Self {
        Self {
            kind: KernelKind::Linear,
            c,
            gamma: 1.0,
            coef0: 0.0,
            strict_quadratic: false,
        }
    }

    pub fn rbf(c: f64, gamma: f64) -> Self {
        Self {
            kind: KernelKind::Rbf,
            c,
            gamma,
            coef0: 0.0,
            strict_quadratic: false,
        }
    }

    pub fn quadratic(c: f64, gamma: f64) -> Self {
        Self {
            kind: KernelKind::Quadratic,
            c,
            gamma,
            coef0: 0.0,
            strict_quadratic: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(Error::InvalidParameter(format!("C must be positive, got {}", self.c)));
        }
        if self.kind != KernelKind::Linear && !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "gamma must be positive, got {}",
                self.gamma
            )));
        }
        Ok(())
    }

    /// Kernel value from the dot product and squared distance of two rows.
    #[inline]
    pub fn eval(&self, dot: f64, sq_dist: f64) -> f64 {
        match self.kind {
            KernelKind::Linear => dot,
            KernelKind::Quadratic if self.strict_quadratic => {
                let t = -self.gamma * dot;
                t * t
            }
            KernelKind::Quadratic => {
                let t = self.gamma * dot + self.coef0;
                t * t
            }
            KernelKind::Rbf => (-self.gamma * sq_dist).exp(),
        }
    }
}

pub fn kernel(u: &[f64], v: &[f64], spec: &KernelSpec) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::DimensionMismatch {
            expected: u.len(),
            actual: v.len(),
        });
    }
    let dot = u.iter().zip(v).map(|(a, b)| a * b).sum();
    let sq = u.iter().zip(v).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok(spec.eval(dot, sq))
}

/// Symmetric kernel matrix access for the solver.
pub trait Gram {
    fn len(&self) -> usize;
    fn get(&self, i: usize, j: usize) -> f64;
    fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Fully materialized kernel matrix.
#[derive(Debug, Clone)]
pub struct DenseGram {
    n: usize,
    values: Vec<f64>,
}

impl DenseGram {
    pub fn new(rows: &[&[f64]], spec: &KernelSpec) -> Result<Self> {
        let n = rows.len();
        let mut values = vec![0.0; n * n];
        for i in 0..n {
            for j in i..n {
                let k = kernel(rows[i], rows[j], spec)?;
                values[i * n + j] = k;
                values[j * n + i] = k;
            }
        }
        Ok(Self { n, values })
    }
}

impl Gram for DenseGram {
    fn len(&self) -> usize {
        self.n
    }

    #[inline]
    fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n + j]
    }
}

fn count_matches(a: &[u32], b: &[u32]) -> u16 {
    a.iter().zip(b).filter(|(x, y)| x == y).count() as u16
}

/// Pairwise feature-agreement counts between two sets of code rows.
#[derive(Debug, Clone)]
pub struct MatchMatrix {
    rows: usize,
    cols: usize,
    n_features: usize,
    matches: Vec<u16>,
}

impl MatchMatrix {
    pub fn between(a: &[Vec<u32>], b: &[Vec<u32>], n_features: usize) -> Self {
        let mut matches = Vec::with_capacity(a.len() * b.len());
        for ra in a {
            matches.extend(b.iter().map(|rb| count_matches(ra, rb)));
        }
        Self {
            rows: a.len(),
            cols: b.len(),
            n_features,
            matches,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> u16 {
        self.matches[i * self.cols + j]
    }

    /// Kernel value per possible match count for one-hot rows of
    /// `n_features` features: dot = m, squared distance = 2 (F - m).
    pub fn kernel_table(&self, spec: &KernelSpec) -> Vec<f64> {
        let f = self.n_features as f64;
        (0..=self.n_features)
            .map(|m| spec.eval(m as f64, 2.0 * (f - m as f64)))
            .collect()
    }
}

/// Kernel matrix of one-hot categorical rows, read through match counts.
pub struct CategoricalGram<'a> {
    matches: &'a MatchMatrix,
    table: Vec<f64>,
}

impl<'a> CategoricalGram<'a> {
    pub fn new(matches: &'a MatchMatrix, spec: &KernelSpec) -> Self {
        Self {
            table: matches.kernel_table(spec),
            matches,
        }
    }
}

impl Gram for CategoricalGram<'_> {
    fn len(&self) -> usize {
        self.matches.rows
    }

    #[inline]
    fn get(&self, i: usize, j: usize) -> f64 {
        self.table[self.matches.get(i, j) as usize]
    }
}

/// Stopping rule of the solver.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmoParams {
    /// Largest KKT violation accepted at convergence.
    pub tol: f64,
    /// Iteration budget in units of the training-set size.
    pub max_passes: usize,
}

impl Default for SmoParams {
    fn default() -> Self {
        Self {
            tol: 1e-3,
            max_passes: 50,
        }
    }
}

/// Dual solution for labels `y ∈ {-1, +1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct SmoSolution {
    pub alpha: Vec<f64>,
    pub bias: f64,
    pub iterations: usize,
    /// Maximal KKT violation `m(α) - M(α)` at exit.
    pub kkt_gap: f64,
    pub converged: bool,
}

const TAU: f64 = 1e-12;

/// Solves `max Σα - ½ ΣΣ αᵢαⱼyᵢyⱼKᵢⱼ` s.t. `0 ≤ α ≤ C`, `Σ αᵢyᵢ = 0`.
pub fn solve_smo<G: Gram>(gram: &G, y: &[f64], c: f64, params: &SmoParams) -> Result<SmoSolution> {
    let n = gram.len();
    if y.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: y.len(),
        });
    }
    if !(y.iter().any(|&v| v > 0.0) && y.iter().any(|&v| v < 0.0)) {
        return Err(Error::DegenerateTraining("an SVM needs both classes".into()));
    }
    let mut alpha = vec![0.0; n];
    // gradient of the minimization form ½αᵀQα - eᵀα
    let mut grad = vec![-1.0; n];
    let diag: Vec<f64> = (0..n).map(|i| gram.get(i, i)).collect();
    let max_iter = params.max_passes.saturating_mul(n.max(100));
    let upper = |a: f64| a >= c;
    let lower = |a: f64| a <= 0.0;

    let mut iterations = 0;
    let mut kkt_gap;
    let mut converged = false;
    loop {
        // select i: maximal -y_t G_t over I_up
        let mut gmax = f64::NEG_INFINITY;
        let mut i_sel = usize::MAX;
        for t in 0..n {
            let in_up = if y[t] > 0.0 { !upper(alpha[t]) } else { !lower(alpha[t]) };
            if in_up && -y[t] * grad[t] >= gmax {
                gmax = -y[t] * grad[t];
                i_sel = t;
            }
        }
        // select j: second-order gain over I_low
        let mut gmax2 = f64::NEG_INFINITY;
        let mut j_sel = usize::MAX;
        let mut best_obj = f64::INFINITY;
        for t in 0..n {
            let in_low = if y[t] > 0.0 { !lower(alpha[t]) } else { !upper(alpha[t]) };
            if !in_low {
                continue;
            }
            let yg = y[t] * grad[t];
            if yg >= gmax2 {
                gmax2 = yg;
            }
            if i_sel == usize::MAX {
                continue;
            }
            let grad_diff = gmax + yg;
            if grad_diff > 0.0 {
                let quad = diag[i_sel] + diag[t] - 2.0 * gram.get(i_sel, t);
                let obj = -(grad_diff * grad_diff) / if quad > 0.0 { quad } else { TAU };
                if obj <= best_obj {
                    best_obj = obj;
                    j_sel = t;
                }
            }
        }
        kkt_gap = gmax + gmax2;
        if kkt_gap < params.tol || j_sel == usize::MAX || i_sel == usize::MAX {
            converged = true;
            break;
        }
        if iterations >= max_iter {
            break;
        }
        iterations += 1;

        let (i, j) = (i_sel, j_sel);
        let kij = gram.get(i, j);
        let (old_i, old_j) = (alpha[i], alpha[j]);
        if y[i] != y[j] {
            // Q_ii + Q_jj + 2 Q_ij with Q_ij = -K_ij
            let quad = diag[i] + diag[j] - 2.0 * kij;
            let quad = if quad > 0.0 { quad } else { TAU };
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > 0.0 {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let quad = diag[i] + diag[j] - 2.0 * kij;
            let quad = if quad > 0.0 { quad } else { TAU };
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > c {
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }
        let di = alpha[i] - old_i;
        let dj = alpha[j] - old_j;
        for (t, g) in grad.iter_mut().enumerate() {
            *g += y[t] * (y[i] * gram.get(i, t) * di + y[j] * gram.get(j, t) * dj);
        }
    }

    // threshold from free vectors, else the midpoint of the feasible interval
    let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut free, mut free_sum) = (0usize, 0.0);
    for t in 0..n {
        let yg = y[t] * grad[t];
        if upper(alpha[t]) {
            if y[t] < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if lower(alpha[t]) {
            if y[t] > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            free += 1;
            free_sum += yg;
        }
    }
    let rho = if free > 0 { free_sum / free as f64 } else { (ub + lb) / 2.0 };
    Ok(SmoSolution {
        alpha,
        bias: -rho,
        iterations,
        kkt_gap,
        converged,
    })
}

/// Dual objective `Σα - ½ ΣΣ αᵢαⱼyᵢyⱼKᵢⱼ`.
pub fn dual_objective<G: Gram>(gram: &G, y: &[f64], alpha: &[f64]) -> f64 {
    let n = alpha.len();
    let mut quad = 0.0;
    for i in 0..n {
        if alpha[i] == 0.0 {
            continue;
        }
        for j in 0..n {
            quad += alpha[i] * alpha[j] * y[i] * y[j] * gram.get(i, j);
        }
    }
    alpha.iter().sum::<f64>() - 0.5 * quad
}

pub(crate) fn signed_labels(labels: &[u8]) -> Vec<f64> {
    labels.iter().map(|&l| if l == 1 { 1.0 } else { -1.0 }).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SvmModel {
    spec: KernelSpec,
    support: Vec<Vec<f64>>,
    /// Code rows of the support vectors when trained on categorical data.
    support_codes: Option<Vec<Vec<u32>>>,
    layout: Option<OneHotLayout>,
    /// `αᵢ yᵢ` per support vector.
    coef: Vec<f64>,
    bias: f64,
    alpha: Vec<f64>,
    iterations: usize,
    kkt_gap: f64,
}

impl SvmModel {
    fn from_solution(
        spec: KernelSpec,
        sol: &SmoSolution,
        y: &[f64],
        encoded: impl Fn(usize) -> Vec<f64>,
        codes: Option<&dyn Fn(usize) -> Vec<u32>>,
        layout: Option<OneHotLayout>,
    ) -> Self {
        let sv: Vec<usize> = (0..sol.alpha.len()).filter(|&i| sol.alpha[i] > 0.0).collect();
        SvmModel {
            spec,
            support: sv.iter().map(|&i| encoded(i)).collect(),
            support_codes: codes.map(|f| sv.iter().map(|&i| f(i)).collect()),
            layout,
            coef: sv.iter().map(|&i| sol.alpha[i] * y[i]).collect(),
            bias: sol.bias,
            alpha: sol.alpha.clone(),
            iterations: sol.iterations,
            kkt_gap: sol.kkt_gap,
        }
    }

    pub fn spec(&self) -> &KernelSpec {
        &self.spec
    }

    pub fn support_vectors(&self) -> &[Vec<f64>] {
        &self.support
    }

    /// Dual coefficients `αᵢ yᵢ` of the support vectors.
    pub fn dual_coef(&self) -> &[f64] {
        &self.coef
    }

    /// All training multipliers, in training order.
    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn bias(&self) -> f64 {
        self.bias
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    pub fn kkt_gap(&self) -> f64 {
        self.kkt_gap
    }

    pub fn decision_function(&self, x: &[f64]) -> Result<f64> {
        let mut f = self.bias;
        for (sv, c) in self.support.iter().zip(&self.coef) {
            f += c * kernel(sv, x, &self.spec)?;
        }
        Ok(f)
    }

    /// Decision value of a categorical example, for models trained on codes.
    pub fn decision_codes(&self, example: &[u32]) -> Result<f64> {
        match (&self.support_codes, &self.layout) {
            (Some(codes), Some(layout)) => {
                layout.check_row(example)?;
                let f = layout.n_features() as f64;
                let mut out = self.bias;
                for (sv, c) in codes.iter().zip(&self.coef) {
                    let m = count_matches(sv, example) as f64;
                    out += c * self.spec.eval(m, 2.0 * (f - m));
                }
                Ok(out)
            }
            _ => Err(Error::IncompatibleExample(
                "model was trained on encoded rows; pass an encoded example".into(),
            )),
        }
    }

    pub fn predict_encoded(&self, x: &[f64]) -> Result<u8> {
        Ok(u8::from(self.decision_function(x)? >= 0.0))
    }

    pub fn predict(&self, example: &[u32]) -> Result<u8> {
        Ok(u8::from(self.decision_codes(example)? >= 0.0))
    }
}

/// Trains on an arbitrary real-valued matrix.
pub fn train_svm(train: &EncodedMatrix, spec: &KernelSpec, params: &SmoParams) -> Result<SvmModel> {
    spec.validate()?;
    let rows: Vec<&[f64]> = (0..train.n_rows()).map(|r| train.row(r)).collect();
    let gram = DenseGram::new(&rows, spec)?;
    let y = signed_labels(train.labels());
    let sol = solve_smo(&gram, &y, spec.c, params)?;
    Ok(SvmModel::from_solution(
        *spec,
        &sol,
        &y,
        |i| train.row(i).to_vec(),
        None,
        None,
    ))
}

/// Trains on one-hot encoded categorical data using precomputed agreements.
pub(crate) fn train_svm_with_matches(
    train: &Dataset,
    train_rows: &[Vec<u32>],
    matches: &MatchMatrix,
    spec: &KernelSpec,
    params: &SmoParams,
) -> Result<SvmModel> {
    spec.validate()?;
    let gram = CategoricalGram::new(matches, spec);
    let y = signed_labels(train.labels());
    let sol = solve_smo(&gram, &y, spec.c, params)?;
    let layout = OneHotLayout::for_dataset(train);
    let code_row = |i: usize| train_rows[i].clone();
    Ok(SvmModel::from_solution(
        *spec,
        &sol,
        &y,
        |i| layout.encode_row(&train_rows[i]).expect("training rows are in range"),
        Some(&code_row),
        Some(layout.clone()),
    ))
}

/// Trains on a categorical dataset, one-hot encoding it implicitly.
pub fn train_svm_categorical(train: &Dataset, spec: &KernelSpec, params: &SmoParams) -> Result<SvmModel> {
    let rows = train.rows();
    let matches = MatchMatrix::between(&rows, &rows, train.n_features());
    train_svm_with_matches(train, &rows, &matches, spec, params)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::relational::{one_hot_encode, Column, FeatureRole};
    use crate::relational::fixtures::domain;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn tight() -> SmoParams {
        SmoParams {
            tol: 1e-10,
            max_passes: 10_000,
        }
    }

    #[test]
    fn kernel_values() {
        let u = [0.0, 1.0, 1.0, 0.0];
        let v = [1.0, 0.0, 1.0, 0.0];
        assert_eq!(kernel(&u, &u, &KernelSpec::rbf(1.0, 3.7)).unwrap(), 1.0);
        assert_eq!(kernel(&u, &v, &KernelSpec::linear(1.0)).unwrap(), 1.0);
        assert!((kernel(&u, &v, &KernelSpec::rbf(1.0, 0.1)).unwrap() - (-0.2f64).exp()).abs() < 1e-15);
        let q = KernelSpec::quadratic(1.0, 0.5);
        let strict = KernelSpec {
            strict_quadratic: true,
            ..q
        };
        assert_eq!(kernel(&u, &u, &q).unwrap(), 1.0);
        assert_eq!(kernel(&u, &u, &strict).unwrap(), 1.0);
        assert!(matches!(
            kernel(&u, &[1.0], &q),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn spec_validation() {
        assert!(KernelSpec::rbf(0.0, 1.0).validate().is_err());
        assert!(KernelSpec::rbf(1.0, 0.0).validate().is_err());
        assert!(KernelSpec::linear(1.0).validate().is_ok());
    }

    #[test]
    fn two_points_have_the_analytic_margin() {
        let m = EncodedMatrix::from_rows(vec![vec![1.0, 0.0], vec![0.0, 1.0]], vec![1, 0]).unwrap();
        let model = train_svm(&m, &KernelSpec::linear(10.0), &tight()).unwrap();
        let a = model.alpha();
        assert!((a[0] - 1.0).abs() < 1e-9 && (a[1] - 1.0).abs() < 1e-9);
        assert!(model.decision_function(&[0.5, 0.5]).unwrap().abs() < 1e-9);
        assert!((model.decision_function(&[1.0, 0.0]).unwrap() - 1.0).abs() < 1e-9);
        assert_eq!(model.predict_encoded(&[1.0, 0.0]).unwrap(), 1);
        assert_eq!(model.predict_encoded(&[0.0, 1.0]).unwrap(), 0);
    }

    #[test]
    fn single_class_is_degenerate() {
        let m = EncodedMatrix::from_rows(vec![vec![1.0], vec![0.0]], vec![1, 1]).unwrap();
        assert!(matches!(
            train_svm(&m, &KernelSpec::linear(1.0), &SmoParams::default()),
            Err(Error::DegenerateTraining(_))
        ));
    }

    fn random_categorical(seed: u64, n: usize) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cols = (0..3)
            .map(|i| Column::new(format!("f{i}"), domain("d", 3), (0..n).map(|_| rng.random_range(0..3)).collect()).unwrap())
            .collect();
        let mut labels: Vec<u8> = (0..n).map(|_| rng.random_range(0..2)).collect();
        labels[0] = 0;
        labels[1] = 1;
        Dataset::new(cols, vec![FeatureRole::Home; 3], labels).unwrap()
    }

    #[test]
    fn categorical_path_matches_dense_path() {
        let d = random_categorical(4, 40);
        let enc = one_hot_encode(&d).unwrap();
        for spec in [KernelSpec::rbf(10.0, 0.3), KernelSpec::quadratic(1.0, 0.5), KernelSpec::linear(0.5)] {
            let dense = train_svm(&enc, &spec, &tight()).unwrap();
            let cat = train_svm_categorical(&d, &spec, &tight()).unwrap();
            for r in 0..d.n_rows() {
                let a = dense.decision_function(enc.row(r)).unwrap();
                let b = cat.decision_codes(&d.row(r)).unwrap();
                let c = cat.decision_function(enc.row(r)).unwrap();
                assert!((a - b).abs() < 1e-6, "{a} vs {b}");
                assert!((b - c).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn solution_is_dual_feasible() {
        let d = random_categorical(8, 60);
        let spec = KernelSpec::rbf(1.0, 0.5);
        let model = train_svm_categorical(&d, &spec, &SmoParams::default()).unwrap();
        let y = signed_labels(d.labels());
        let s: f64 = model.alpha().iter().zip(&y).map(|(a, y)| a * y).sum();
        assert!(s.abs() < 1e-8);
        assert!(model.alpha().iter().all(|&a| (0.0..=spec.c).contains(&a)));
        assert!(model.kkt_gap() <= 1e-3);
    }
}
