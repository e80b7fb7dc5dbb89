//! Desk-scale classifiers over categorical datasets and a uniform prediction
//! contract on code rows.

pub mod grid;
pub mod knn;
pub mod logreg;
pub mod naive_bayes;
pub mod svm;
pub mod tree;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::relational::Dataset;

pub use grid::{grid_search, GridOutcome, HyperGrid, ModelParams};
pub use knn::NearestNeighbor;
pub use logreg::{train_logreg, train_logreg_categorical, LogRegModel, LogRegParams};
pub use naive_bayes::{train_nb, NbModel};
pub use svm::{train_svm, train_svm_categorical, KernelKind, KernelSpec, SmoParams, SvmModel};
pub use tree::{best_split, impurity, train_tree, DecisionTree, SplitCriterion, TreeParams};

/// Model families with a standard tuning grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ModelFamily {
    DecisionTree(SplitCriterion),
    RbfSvm,
    QuadraticSvm,
    LinearSvm,
    OneNn,
    NaiveBayes,
    LogReg,
}

impl ModelFamily {
    pub fn name(self) -> String {
        match self {
            ModelFamily::DecisionTree(c) => format!("tree_{}", c.name()),
            ModelFamily::RbfSvm => "rbf_svm".into(),
            ModelFamily::QuadraticSvm => "quadratic_svm".into(),
            ModelFamily::LinearSvm => "linear_svm".into(),
            ModelFamily::OneNn => "1nn".into(),
            ModelFamily::NaiveBayes => "naive_bayes".into(),
            ModelFamily::LogReg => "logreg".into(),
        }
    }

    /// Inverse of [`ModelFamily::name`]; `tree` alone means the Gini tree.
    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "tree" | "tree_gini" => ModelFamily::DecisionTree(SplitCriterion::Gini),
            "tree_infogain" => ModelFamily::DecisionTree(SplitCriterion::InfoGain),
            "tree_gainratio" => ModelFamily::DecisionTree(SplitCriterion::GainRatio),
            "rbf_svm" => ModelFamily::RbfSvm,
            "quadratic_svm" => ModelFamily::QuadraticSvm,
            "linear_svm" => ModelFamily::LinearSvm,
            "1nn" => ModelFamily::OneNn,
            "naive_bayes" => ModelFamily::NaiveBayes,
            "logreg" => ModelFamily::LogReg,
            _ => return None,
        })
    }
}

/// A trained model of any family.
#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    Tree(DecisionTree),
    Svm(SvmModel),
    OneNn(NearestNeighbor),
    NaiveBayes(NbModel),
    LogReg(LogRegModel),
}

impl Model {
    pub fn predict(&self, example: &[u32]) -> Result<u8> {
        match self {
            Model::Tree(m) => m.predict(example),
            Model::Svm(m) => m.predict(example),
            Model::OneNn(m) => m.predict(example),
            Model::NaiveBayes(m) => m.predict(example),
            Model::LogReg(m) => m.predict(example),
        }
    }

    pub fn predict_dataset(&self, data: &Dataset) -> Result<Vec<u8>> {
        (0..data.n_rows()).map(|r| self.predict(&data.row(r))).collect()
    }

    /// Fraction of rows predicted correctly; 0 rows give accuracy 0.
    pub fn accuracy(&self, data: &Dataset) -> Result<f64> {
        let pred = self.predict_dataset(data)?;
        Ok(accuracy(&pred, data.labels()))
    }
}

pub fn accuracy(pred: &[u8], labels: &[u8]) -> f64 {
    if labels.is_empty() {
        return 0.0;
    }
    let correct = pred.iter().zip(labels).filter(|(a, b)| a == b).count();
    correct as f64 / labels.len() as f64
}
