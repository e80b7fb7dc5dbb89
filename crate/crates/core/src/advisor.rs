//! Tuple-ratio rule for deciding whether a dimension table can be left
//! unjoined.
//!
//! The verdict is conservative: `NotSafe` means the rule cannot vouch for
//! dropping the foreign features, not that dropping them loses accuracy.

use serde::{Deserialize, Serialize};

use crate::classifiers::ModelFamily;
use crate::error::{Error, Result};
use crate::relational::{tuple_ratio, StarSchema};

/// Minimum training rows per FK value at which each family is expected to
/// be unaffected by dropping a dimension's features.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ThresholdTable {
    /// Decision trees and multi-layer perceptrons.
    pub tree: f64,
    pub rbf_svm: f64,
    /// Unvalidated; defaults to the RBF-SVM threshold.
    pub quadratic_svm: f64,
    /// Linear SVM, logistic regression and Naive Bayes.
    pub linear: f64,
    /// 1-NN; defaults to the RBF-SVM threshold.
    pub one_nn: f64,
}

impl Default for ThresholdTable {
    fn default() -> Self {
        Self {
            tree: 3.0,
            rbf_svm: 6.0,
            quadratic_svm: 6.0,
            linear: 20.0,
            one_nn: 6.0,
        }
    }
}

impl ThresholdTable {
    pub fn validate(&self) -> Result<()> {
        let all = [self.tree, self.rbf_svm, self.quadratic_svm, self.linear, self.one_nn];
        if all.iter().any(|t| !(*t > 0.0 && t.is_finite())) {
            return Err(Error::InvalidParameter(format!("thresholds must be positive, got {self:?}")));
        }
        Ok(())
    }

    pub fn threshold(&self, family: ModelFamily) -> f64 {
        match family {
            ModelFamily::DecisionTree(_) => self.tree,
            ModelFamily::RbfSvm => self.rbf_svm,
            ModelFamily::QuadraticSvm => self.quadratic_svm,
            ModelFamily::LinearSvm | ModelFamily::LogReg | ModelFamily::NaiveBayes => self.linear,
            ModelFamily::OneNn => self.one_nn,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Verdict {
    SafeToAvoid,
    NotSafe,
    /// The FK has an open domain and cannot stand in for the dimension.
    Inapplicable,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::SafeToAvoid => "safe_to_avoid",
            Verdict::NotSafe => "not_safe",
            Verdict::Inapplicable => "inapplicable",
        }
    }
}

/// What the advisor knows about one dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DimensionStats {
    pub name: String,
    pub n_r: usize,
    pub open_domain: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DimensionAdvice {
    pub dimension: String,
    pub tuple_ratio: f64,
    pub threshold: f64,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Recommendation {
    pub family: ModelFamily,
    pub train_rows: usize,
    pub dims: Vec<DimensionAdvice>,
}

impl Recommendation {
    pub const CSV_HEADER: &'static str = "dimension,family,train_rows,n_r,tuple_ratio,threshold,verdict";

    pub fn to_csv(&self, stats: &[DimensionStats]) -> String {
        let mut out = format!("{}\n", Self::CSV_HEADER);
        for (d, s) in self.dims.iter().zip(stats) {
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                d.dimension,
                self.family.name(),
                self.train_rows,
                s.n_r,
                d.tuple_ratio,
                d.threshold,
                d.verdict.as_str()
            ));
        }
        out
    }
}

/// Verdict per dimension from the training row count and each dimension's
/// cardinality: safe iff `train_rows / n_R >= threshold`.
pub fn recommend(
    train_rows: usize,
    dims: &[DimensionStats],
    family: ModelFamily,
    thresholds: &ThresholdTable,
) -> Result<Recommendation> {
    thresholds.validate()?;
    let threshold = thresholds.threshold(family);
    let dims = dims
        .iter()
        .map(|d| {
            let ratio = tuple_ratio(train_rows, d.n_r).map_err(|e| e.context(format!("dimension `{}`", d.name)))?;
            let verdict = if d.open_domain {
                Verdict::Inapplicable
            } else if ratio >= threshold {
                Verdict::SafeToAvoid
            } else {
                Verdict::NotSafe
            };
            Ok(DimensionAdvice {
                dimension: d.name.clone(),
                tuple_ratio: ratio,
                threshold,
                verdict,
            })
        })
        .collect::<Result<_>>()?;
    Ok(Recommendation {
        family,
        train_rows,
        dims,
    })
}

/// Advisor inputs of a star whose fact table is the training split.
pub fn dimension_stats(train: &StarSchema) -> Vec<DimensionStats> {
    train
        .bindings()
        .iter()
        .map(|b| {
            let d = &train.dims()[b.dim];
            DimensionStats {
                name: d.name().to_string(),
                n_r: d.n_rows(),
                open_domain: b.open_domain,
            }
        })
        .collect()
}
