//! Hyper-parameter grids and validation-set grid search.
//!
//! Tree grids grow one unpruned tree and truncate it per combination. SVM
//! grids share the train-vs-train and train-vs-validation match counts
//! across all kernel settings.

use serde::{Deserialize, Serialize};

use super::knn::NearestNeighbor;
use super::logreg::{train_logreg_categorical, LogRegParams};
use super::naive_bayes::train_nb;
use super::svm::{signed_labels, train_svm_with_matches, KernelSpec, MatchMatrix, SmoParams};
use super::tree::{train_tree, TreeParams};
use super::{accuracy, Model, ModelFamily};
use crate::error::{Error, Result};
use crate::relational::{Dataset, OneHotLayout};

pub const TREE_MINSPLIT: [usize; 4] = [1, 10, 100, 1000];
pub const TREE_CP: [f64; 5] = [1e-4, 1e-3, 0.01, 0.1, 0.0];
pub const SVM_C: [f64; 5] = [0.1, 1.0, 10.0, 100.0, 1000.0];
pub const SVM_GAMMA: [f64; 6] = [1e-4, 1e-3, 0.01, 0.1, 1.0, 10.0];
pub const LOGREG_L2: [f64; 4] = [1e-4, 1e-3, 1e-2, 1e-1];

/// One point of a grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ModelParams {
    Tree(TreeParams),
    Svm(KernelSpec),
    LogReg(LogRegParams),
    /// Families without hyper-parameters.
    Fixed,
}

impl std::fmt::Display for ModelParams {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ModelParams::Tree(t) => write!(f, "minsplit={} cp={}", t.minsplit, t.cp),
            ModelParams::Svm(k) => write!(f, "C={} gamma={}", k.c, k.gamma),
            ModelParams::LogReg(l) => write!(f, "l2={}", l.l2),
            ModelParams::Fixed => write!(f, "none"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HyperGrid {
    family: ModelFamily,
    combos: Vec<ModelParams>,
    smo: SmoParams,
}

impl HyperGrid {
    /// Rejects empty grids, duplicates, and combinations of the wrong family.
    pub fn new(family: ModelFamily, combos: Vec<ModelParams>) -> Result<Self> {
        if combos.is_empty() {
            return Err(Error::InvalidParameter("hyper-parameter grid is empty".into()));
        }
        for (i, c) in combos.iter().enumerate() {
            if combos[..i].contains(c) {
                return Err(Error::InvalidParameter(format!("grid combination {c:?} is repeated")));
            }
            let fits = match (family, c) {
                (ModelFamily::DecisionTree(_), ModelParams::Tree(_)) => true,
                (ModelFamily::RbfSvm, ModelParams::Svm(s)) => s.kind == super::KernelKind::Rbf,
                (ModelFamily::QuadraticSvm, ModelParams::Svm(s)) => s.kind == super::KernelKind::Quadratic,
                (ModelFamily::LinearSvm, ModelParams::Svm(s)) => s.kind == super::KernelKind::Linear,
                (ModelFamily::LogReg, ModelParams::LogReg(_)) => true,
                (ModelFamily::OneNn | ModelFamily::NaiveBayes, ModelParams::Fixed) => true,
                _ => false,
            };
            if !fits {
                return Err(Error::InvalidParameter(format!(
                    "combination {c:?} does not belong to family {}",
                    family.name()
                )));
            }
        }
        Ok(Self {
            family,
            combos,
            smo: SmoParams::default(),
        })
    }

    /// The standard grid of a family: minsplit x cp for trees, C x gamma for
    /// the RBF and quadratic SVMs, C for the linear SVM, L2 strength for
    /// logistic regression.
    pub fn standard(family: ModelFamily) -> Self {
        let combos = match family {
            ModelFamily::DecisionTree(_) => TREE_MINSPLIT
                .iter()
                .flat_map(|&m| TREE_CP.iter().map(move |&cp| ModelParams::Tree(TreeParams { minsplit: m, cp })))
                .collect(),
            ModelFamily::RbfSvm => svm_grid(KernelSpec::rbf),
            ModelFamily::QuadraticSvm => svm_grid(KernelSpec::quadratic),
            ModelFamily::LinearSvm => SVM_C.iter().map(|&c| ModelParams::Svm(KernelSpec::linear(c))).collect(),
            ModelFamily::LogReg => LOGREG_L2
                .iter()
                .map(|&l2| {
                    ModelParams::LogReg(LogRegParams {
                        l2,
                        learning_rate: 0.5,
                        epochs: 500,
                    })
                })
                .collect(),
            ModelFamily::OneNn | ModelFamily::NaiveBayes => vec![ModelParams::Fixed],
        };
        Self::new(family, combos).expect("standard grids are valid")
    }

    pub fn with_smo(mut self, smo: SmoParams) -> Self {
        self.smo = smo;
        self
    }

    pub fn family(&self) -> ModelFamily {
        self.family
    }

    pub fn combos(&self) -> &[ModelParams] {
        &self.combos
    }

    pub fn smo(&self) -> SmoParams {
        self.smo
    }

    pub fn len(&self) -> usize {
        self.combos.len()
    }

    pub fn is_empty(&self) -> bool {
        self.combos.is_empty()
    }
}

fn svm_grid(make: fn(f64, f64) -> KernelSpec) -> Vec<ModelParams> {
    SVM_C
        .iter()
        .flat_map(|&c| SVM_GAMMA.iter().map(move |&g| ModelParams::Svm(make(c, g))))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridOutcome {
    pub best_index: usize,
    pub best: ModelParams,
    pub model: Model,
    /// Validation accuracy per combination; `None` where training failed.
    pub validation_accuracy: Vec<Option<f64>>,
}

/// Fits every combination on `train`, keeps the first one with the highest
/// validation accuracy, and returns its model.
pub fn grid_search(train: &Dataset, validation: &Dataset, grid: &HyperGrid) -> Result<GridOutcome> {
    if train.n_features() != validation.n_features() {
        return Err(Error::DimensionMismatch {
            expected: train.n_features(),
            actual: validation.n_features(),
        });
    }
    let (mut models, scores) = match grid.family {
        ModelFamily::DecisionTree(criterion) => {
            let full = train_tree(train, TreeParams::unpruned(), criterion)?;
            let val_rows = validation.rows();
            let mut models = Vec::new();
            let mut scores = Vec::new();
            for c in &grid.combos {
                let ModelParams::Tree(p) = c else { unreachable!() };
                let m = full.with_params(*p);
                let pred: Vec<u8> = val_rows.iter().map(|r| m.predict_unchecked(r)).collect();
                scores.push(Ok(accuracy(&pred, validation.labels())));
                models.push(Ok(Model::Tree(m)));
            }
            (models, scores)
        }
        ModelFamily::RbfSvm | ModelFamily::QuadraticSvm | ModelFamily::LinearSvm => {
            let train_rows = train.rows();
            let val_rows = validation.rows();
            let layout = OneHotLayout::for_dataset(train);
            for r in &val_rows {
                layout.check_row(r)?;
            }
            let f = train.n_features();
            let gram = MatchMatrix::between(&train_rows, &train_rows, f);
            let cross = MatchMatrix::between(&train_rows, &val_rows, f);
            let y = signed_labels(train.labels());
            let mut models = Vec::new();
            let mut scores = Vec::new();
            for c in &grid.combos {
                let ModelParams::Svm(spec) = c else { unreachable!() };
                let fitted = train_svm_with_matches(train, &train_rows, &gram, spec, &grid.smo);
                match fitted {
                    Ok(m) => {
                        let table = cross.kernel_table(spec);
                        let coef: Vec<(usize, f64)> = m
                            .alpha()
                            .iter()
                            .enumerate()
                            .filter(|(_, &a)| a > 0.0)
                            .map(|(i, &a)| (i, a * y[i]))
                            .collect();
                        let pred: Vec<u8> = (0..val_rows.len())
                            .map(|v| {
                                let d = coef
                                    .iter()
                                    .fold(m.bias(), |acc, &(i, c)| acc + c * table[cross.get(i, v) as usize]);
                                u8::from(d >= 0.0)
                            })
                            .collect();
                        scores.push(Ok(accuracy(&pred, validation.labels())));
                        models.push(Ok(Model::Svm(m)));
                    }
                    Err(e) => {
                        scores.push(Err(e.clone()));
                        models.push(Err(e));
                    }
                }
            }
            (models, scores)
        }
        _ => {
            let mut models = Vec::new();
            let mut scores = Vec::new();
            for c in &grid.combos {
                let fitted = match (grid.family, c) {
                    (ModelFamily::OneNn, _) => NearestNeighbor::fit(train).map(Model::OneNn),
                    (ModelFamily::NaiveBayes, _) => train_nb(train).map(Model::NaiveBayes),
                    (ModelFamily::LogReg, ModelParams::LogReg(p)) => train_logreg_categorical(train, p).map(Model::LogReg),
                    _ => unreachable!("grid combinations are validated at construction"),
                };
                let score = fitted.as_ref().map_err(Clone::clone).and_then(|m| m.accuracy(validation));
                scores.push(score);
                models.push(fitted);
            }
            (models, scores)
        }
    };

    let mut best: Option<(usize, f64)> = None;
    let mut first_err = None;
    for (i, s) in scores.iter().enumerate() {
        match s {
            Ok(a) if best.is_none_or(|(_, b)| *a > b) => best = Some((i, *a)),
            Ok(_) => {}
            Err(e) if first_err.is_none() => first_err = Some(e.clone()),
            Err(_) => {}
        }
    }
    let Some((best_index, _)) = best else {
        let e = first_err.expect("non-empty grid");
        return Err(e.context(format!("every {} grid combination failed", grid.family.name())));
    };
    let validation_accuracy = scores.iter().map(|s| s.as_ref().ok().copied()).collect();
    let model = models.swap_remove(best_index)?;
    Ok(GridOutcome {
        best_index,
        best: grid.combos[best_index],
        model,
        validation_accuracy,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifiers::SplitCriterion;
    use crate::relational::fixtures::random_star;
    use crate::relational::{apply_feature_view, split_three_way, FeatureView};

    fn splits(seed: u64) -> (Dataset, Dataset, Dataset) {
        let star = random_star(seed, 80, 1, 6, 2, 2);
        let d = apply_feature_view(&star, &FeatureView::JoinAll).unwrap();
        split_three_way(&d, seed).unwrap()
    }

    #[test]
    fn standard_grid_sizes() {
        assert_eq!(HyperGrid::standard(ModelFamily::DecisionTree(SplitCriterion::Gini)).len(), 20);
        assert_eq!(HyperGrid::standard(ModelFamily::RbfSvm).len(), 30);
        assert_eq!(HyperGrid::standard(ModelFamily::LinearSvm).len(), 5);
        assert_eq!(HyperGrid::standard(ModelFamily::OneNn).len(), 1);
    }

    #[test]
    fn invalid_grids_rejected() {
        let fam = ModelFamily::DecisionTree(SplitCriterion::Gini);
        assert!(HyperGrid::new(fam, vec![]).is_err());
        let p = ModelParams::Tree(TreeParams::unpruned());
        assert!(HyperGrid::new(fam, vec![p, p]).is_err());
        assert!(HyperGrid::new(fam, vec![ModelParams::Fixed]).is_err());
    }

    #[test]
    fn single_combination_wins() {
        let (tr, va, _) = splits(3);
        let p = ModelParams::Tree(TreeParams { minsplit: 10, cp: 0.01 });
        let g = HyperGrid::new(ModelFamily::DecisionTree(SplitCriterion::Gini), vec![p]).unwrap();
        let out = grid_search(&tr, &va, &g).unwrap();
        assert_eq!(out.best_index, 0);
        assert_eq!(out.best, p);
    }

    #[test]
    fn equal_accuracy_picks_first() {
        let (tr, va, _) = splits(4);
        // cp = 1 and cp = 0.999 both give a single leaf
        let g = HyperGrid::new(
            ModelFamily::DecisionTree(SplitCriterion::Gini),
            vec![
                ModelParams::Tree(TreeParams { minsplit: 1, cp: 1.0 }),
                ModelParams::Tree(TreeParams { minsplit: 1, cp: 0.999 }),
            ],
        )
        .unwrap();
        let out = grid_search(&tr, &va, &g).unwrap();
        assert_eq!(out.validation_accuracy[0], out.validation_accuracy[1]);
        assert_eq!(out.best_index, 0);
    }

    #[test]
    fn fast_paths_match_direct_training() {
        let (tr, va, _) = splits(5);
        let g = HyperGrid::standard(ModelFamily::DecisionTree(SplitCriterion::Gini));
        let out = grid_search(&tr, &va, &g).unwrap();
        for (c, acc) in g.combos().iter().zip(&out.validation_accuracy) {
            let ModelParams::Tree(p) = c else { unreachable!() };
            let direct = Model::Tree(train_tree(&tr, *p, SplitCriterion::Gini).unwrap());
            assert_eq!(direct.accuracy(&va).unwrap(), acc.unwrap());
        }
        let g = HyperGrid::new(
            ModelFamily::RbfSvm,
            vec![ModelParams::Svm(KernelSpec::rbf(1.0, 0.1)), ModelParams::Svm(KernelSpec::rbf(10.0, 1.0))],
        )
        .unwrap();
        let out = grid_search(&tr, &va, &g).unwrap();
        for (c, acc) in g.combos().iter().zip(&out.validation_accuracy) {
            let ModelParams::Svm(s) = c else { unreachable!() };
            let direct = Model::Svm(crate::classifiers::train_svm_categorical(&tr, s, &SmoParams::default()).unwrap());
            assert_eq!(direct.accuracy(&va).unwrap(), acc.unwrap());
        }
    }

    #[test]
    fn all_failures_error() {
        let (tr, va, _) = splits(6);
        let ones: Vec<usize> = (0..tr.n_rows()).filter(|&r| tr.labels()[r] == 1).collect();
        let single = tr.select_rows(&ones);
        let g = HyperGrid::standard(ModelFamily::LinearSvm);
        assert!(grid_search(&single, &va, &g).is_err());
        let g = HyperGrid::standard(ModelFamily::OneNn);
        assert!(grid_search(&single, &va, &g).is_ok());
    }
}
