//! Monte Carlo join-avoidance experiments on synthetic star schemas.
//!
//! For every swept value the dimension table and the test set are fixed;
//! each run draws fresh training and validation sets, tunes the model on
//! validation for every feature view, and predicts the shared test set.
//! Errors are then decomposed into bias and net variance against the
//! Bayes-optimal labels, which the generators know.

mod generators;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classifiers::{grid_search, HyperGrid, ModelFamily};
use crate::error::{Error, Result};
use crate::relational::{apply_feature_view, FeatureView};

pub use generators::{
    gen_onexr, gen_reponexr, gen_xsxr, mix, sample_fk, GeneratedSplits, Sample, ScenarioKind, ScenarioSpec,
    SimConfig, SkewSpec, World, MAX_PATTERN_BITS,
};

/// Domingos' 0/1-loss decomposition of a run-by-point prediction matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Decomposition {
    /// Mean disagreement with the optimal labels over runs and points.
    pub avg_error: f64,
    pub bias: f64,
    pub net_variance: f64,
}

/// Main prediction per point is the mode across runs (tie → 0). Variance is
/// the fraction of runs disagreeing with it, counted positively on unbiased
/// points and negatively on biased ones, so `avg_error = bias + net_variance`.
pub fn decompose_bias_variance(predictions: &[Vec<u8>], optimal: &[u8]) -> Result<Decomposition> {
    if predictions.is_empty() || optimal.is_empty() {
        return Err(Error::Empty("decomposition needs at least one run and one point".into()));
    }
    if let Some(row) = predictions.iter().find(|r| r.len() != optimal.len()) {
        return Err(Error::DimensionMismatch {
            expected: optimal.len(),
            actual: row.len(),
        });
    }
    let runs = predictions.len() as f64;
    let (mut err, mut bias, mut net) = (0.0, 0.0, 0.0);
    for (x, &opt) in optimal.iter().enumerate() {
        let ones = predictions.iter().filter(|r| r[x] == 1).count();
        let main = u8::from(2 * ones > predictions.len());
        let disagree_main = if main == 1 { predictions.len() - ones } else { ones };
        let var = disagree_main as f64 / runs;
        let wrong = if opt == 1 { predictions.len() - ones } else { ones };
        err += wrong as f64 / runs;
        if main == opt {
            net += var;
        } else {
            bias += 1.0;
            net -= var;
        }
    }
    let n = optimal.len() as f64;
    Ok(Decomposition {
        avg_error: err / n,
        bias: bias / n,
        net_variance: net / n,
    })
}

/// Parameter a sweep varies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SweepAxis {
    NS,
    NR,
    DS,
    DR,
    P,
    ZipfS,
    NeedleProb,
    XrDomainSize,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::NS => "n_s",
            SweepAxis::NR => "n_r",
            SweepAxis::DS => "d_s",
            SweepAxis::DR => "d_r",
            SweepAxis::P => "p",
            SweepAxis::ZipfS => "zipf_s",
            SweepAxis::NeedleProb => "needle_prob",
            SweepAxis::XrDomainSize => "xr_domain_size",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [
            SweepAxis::NS,
            SweepAxis::NR,
            SweepAxis::DS,
            SweepAxis::DR,
            SweepAxis::P,
            SweepAxis::ZipfS,
            SweepAxis::NeedleProb,
            SweepAxis::XrDomainSize,
        ]
        .into_iter()
        .find(|a| a.name() == s)
    }

    /// Default sweep values.
    pub fn default_values(self) -> Vec<f64> {
        match self {
            SweepAxis::NS => vec![50.0, 100.0, 200.0, 500.0, 1000.0, 2000.0],
            SweepAxis::NR => vec![10.0, 20.0, 40.0, 100.0, 200.0, 333.0],
            SweepAxis::DS | SweepAxis::DR => vec![1.0, 2.0, 4.0, 6.0, 8.0],
            SweepAxis::P => vec![0.0, 0.05, 0.1, 0.2, 0.3, 0.4, 0.5],
            SweepAxis::ZipfS => vec![0.0, 1.0, 2.0, 3.0],
            SweepAxis::NeedleProb => vec![0.1, 0.3, 0.5, 0.7, 0.9],
            SweepAxis::XrDomainSize => vec![2.0, 4.0, 6.0, 8.0, 10.0],
        }
    }

    /// The configuration and scenario at one swept value.
    pub fn apply(self, cfg: SimConfig, spec: ScenarioSpec, value: f64) -> Result<(SimConfig, ScenarioSpec)> {
        let count = || {
            if value >= 0.0 && value.fract() == 0.0 {
                Ok(value as usize)
            } else {
                Err(Error::InvalidParameter(format!("{} must be a count, got {value}", self.name())))
            }
        };
        let (mut cfg, mut spec) = (cfg, spec);
        match self {
            SweepAxis::NS => cfg.n_s = count()?,
            SweepAxis::NR => cfg.n_r = count()?,
            SweepAxis::DS => cfg.d_s = count()?,
            SweepAxis::DR => cfg.d_r = count()?,
            SweepAxis::XrDomainSize => spec.xr_domain_size = count()?,
            SweepAxis::P => match &mut spec.kind {
                ScenarioKind::OneXr { p } | ScenarioKind::RepOneXr { p } => *p = value,
                ScenarioKind::XsXr => {
                    return Err(Error::InvalidParameter("XSXR has no skew probability".into()));
                }
            },
            SweepAxis::ZipfS => spec.fk_skew = SkewSpec::Zipf { s: value },
            SweepAxis::NeedleProb => spec.fk_skew = SkewSpec::NeedleThread { needle_prob: value },
        }
        cfg.validate()?;
        spec.validate()?;
        Ok((cfg, spec))
    }
}

/// A full Monte Carlo sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct MonteCarlo {
    pub scenario: ScenarioSpec,
    pub base: SimConfig,
    pub axis: SweepAxis,
    pub values: Vec<f64>,
    pub approaches: Vec<FeatureView>,
    pub grid: HyperGrid,
    pub runs: usize,
    pub master_seed: u64,
}

impl MonteCarlo {
    /// JoinAll, NoJoin and NoFK with the family's standard grid and 100 runs.
    pub fn new(scenario: ScenarioSpec, base: SimConfig, axis: SweepAxis, values: Vec<f64>, family: ModelFamily) -> Self {
        Self {
            scenario,
            base,
            axis,
            values,
            approaches: vec![FeatureView::JoinAll, FeatureView::NoJoin, FeatureView::NoFK],
            grid: HyperGrid::standard(family),
            runs: 100,
            master_seed: base.seed,
        }
    }

    pub fn with_runs(mut self, runs: usize) -> Self {
        self.runs = runs;
        self
    }

    pub fn with_approaches(mut self, approaches: Vec<FeatureView>) -> Self {
        self.approaches = approaches;
        self
    }

    fn point_seed(&self, value: f64) -> u64 {
        mix(self.master_seed, value.to_bits())
    }
}

/// Per-run outcomes of one approach at one swept value.
#[derive(Debug, Clone, PartialEq)]
pub struct ApproachRuns {
    pub approach: String,
    /// Test error against the drawn test labels, per run.
    pub test_errors: Vec<f64>,
    /// Test-set predictions, per run.
    pub predictions: Vec<Vec<u8>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PointResult {
    pub value: f64,
    pub approaches: Vec<ApproachRuns>,
    /// Bayes-optimal labels of the shared test set.
    pub optimal: Vec<u8>,
    pub test_labels: Vec<u8>,
}

/// Runs every Monte Carlo repetition at one swept value. Run `r` depends
/// only on `(master_seed, value, r)`.
pub fn run_point(mc: &MonteCarlo, value: f64) -> Result<PointResult> {
    if mc.runs == 0 {
        return Err(Error::InvalidParameter("runs must be at least 1".into()));
    }
    if mc.approaches.is_empty() {
        return Err(Error::InvalidParameter("no approaches to compare".into()));
    }
    let ctx = |e: Error| e.context(format!("{} = {value}", mc.axis.name()));
    let (cfg, spec) = mc.axis.apply(mc.base, mc.scenario, value).map_err(ctx)?;
    let point_seed = mc.point_seed(value);
    let world = World::new(SimConfig { seed: point_seed, ..cfg }, spec).map_err(ctx)?;
    let test = world.sample(cfg.holdout_size(), mix(point_seed, 0x7e57)).map_err(ctx)?;
    let test_views = mc
        .approaches
        .iter()
        .map(|v| apply_feature_view(&test.star, v))
        .collect::<Result<Vec<_>>>()
        .map_err(ctx)?;

    let per_run: Vec<Vec<(f64, Vec<u8>)>> = (0..mc.runs)
        .into_par_iter()
        .map(|r| {
            let seed = mix(point_seed, r as u64);
            let train = world.sample(cfg.n_s, mix(seed, 0))?;
            let val = world.sample(cfg.holdout_size(), mix(seed, 1))?;
            mc.approaches
                .iter()
                .zip(&test_views)
                .map(|(view, test_data)| {
                    let tr = apply_feature_view(&train.star, view)?;
                    let va = apply_feature_view(&val.star, view)?;
                    let out = grid_search(&tr, &va, &mc.grid)?;
                    let pred = out.model.predict_dataset(test_data)?;
                    let err = 1.0 - crate::classifiers::accuracy(&pred, test_data.labels());
                    Ok((err, pred))
                })
                .collect::<Result<Vec<_>>>()
                .map_err(|e| e.context(format!("run {r}")))
        })
        .collect::<Result<Vec<_>>>()
        .map_err(ctx)?;

    let approaches = mc
        .approaches
        .iter()
        .enumerate()
        .map(|(a, view)| ApproachRuns {
            approach: view.name(),
            test_errors: per_run.iter().map(|r| r[a].0).collect(),
            predictions: per_run.iter().map(|r| r[a].1.clone()).collect(),
        })
        .collect();
    Ok(PointResult {
        value,
        approaches,
        optimal: test.optimal,
        test_labels: test.star.fact().target().to_vec(),
    })
}

/// One aggregated line of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub scenario: String,
    pub param: String,
    pub value: f64,
    pub approach: String,
    pub model: String,
    pub avg_test_error: f64,
    pub bias: f64,
    pub net_variance: f64,
    pub runs: usize,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SweepReport {
    pub rows: Vec<SweepRow>,
}

pub const REPORT_HEADER: &str = "scenario,param,value,approach,model,avg_test_error,bias,net_variance,runs";

impl SweepReport {
    /// Tidy CSV with a header line.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(REPORT_HEADER);
        out.push('\n');
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{}\n",
                r.scenario, r.param, r.value, r.approach, r.model, r.avg_test_error, r.bias, r.net_variance, r.runs
            ));
        }
        out
    }

    pub fn row(&self, value: f64, approach: &str) -> Option<&SweepRow> {
        self.rows.iter().find(|r| r.value == value && r.approach == approach)
    }
}

/// Aggregates one swept value into report rows, in approach order.
pub fn summarize_point(mc: &MonteCarlo, point: &PointResult) -> Result<Vec<SweepRow>> {
    point
        .approaches
        .iter()
        .map(|a| {
            let d = decompose_bias_variance(&a.predictions, &point.optimal)?;
            Ok(SweepRow {
                scenario: mc.scenario.name().to_string(),
                param: mc.axis.name().to_string(),
                value: point.value,
                approach: a.approach.clone(),
                model: mc.grid.family().name(),
                avg_test_error: a.test_errors.iter().sum::<f64>() / a.test_errors.len() as f64,
                bias: d.bias,
                net_variance: d.net_variance,
                runs: a.test_errors.len(),
            })
        })
        .collect()
}

/// Runs the whole sweep; rows come out in (value, approach) order.
pub fn run_monte_carlo(mc: &MonteCarlo) -> Result<SweepReport> {
    if mc.values.is_empty() {
        return Err(Error::InvalidParameter("sweep has no values".into()));
    }
    let mut rows = Vec::new();
    for &v in &mc.values {
        let point = run_point(mc, v)?;
        rows.extend(summarize_point(mc, &point)?);
    }
    Ok(SweepReport { rows })
}
