//! Experiment configuration files.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use joinsafe_core::advisor::ThresholdTable;
use joinsafe_core::classifiers::ModelFamily;
use joinsafe_core::relational::FeatureView;
use joinsafe_core::simulation::{ScenarioKind, ScenarioSpec, SimConfig, SkewSpec, SweepAxis};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Simulate,
    Experiment,
    Advise,
    Compress,
    Smooth,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Simulate => "simulate",
            Mode::Experiment => "experiment",
            Mode::Advise => "advise",
            Mode::Compress => "compress",
            Mode::Smooth => "smooth",
        }
    }
}

fn default_seed() -> u64 {
    0
}

fn default_runs() -> usize {
    100
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Must match the subcommand when present.
    pub mode: Option<Mode>,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_runs")]
    pub runs: usize,
    #[serde(default = "default_out")]
    pub out: PathBuf,
    pub jobs: Option<usize>,
    /// Star-schema manifest for the dataset modes.
    pub manifest: Option<PathBuf>,
    pub simulate: Option<SimulateSection>,
    pub experiment: Option<ExperimentSection>,
    pub advise: Option<AdviseSection>,
    pub compress: Option<CompressSection>,
    pub smooth: Option<SmoothSection>,
}

fn default_scenario() -> String {
    "onexr".into()
}
fn default_p() -> f64 {
    0.1
}
fn default_skew() -> String {
    "uniform".into()
}
fn default_xr_domain() -> usize {
    2
}
fn default_n_s() -> usize {
    1000
}
fn default_n_r() -> usize {
    40
}
fn default_d() -> usize {
    4
}
fn default_axis() -> String {
    "n_r".into()
}
fn default_families() -> Vec<String> {
    vec!["tree".into()]
}
fn default_approaches() -> Vec<String> {
    vec!["JoinAll".into(), "NoJoin".into(), "NoFK".into()]
}
fn default_family() -> String {
    "tree".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateSection {
    /// `onexr`, `xsxr` or `reponexr`.
    #[serde(default = "default_scenario")]
    pub scenario: String,
    #[serde(default = "default_p")]
    pub p: f64,
    /// `uniform`, `zipf` or `needle`.
    #[serde(default = "default_skew")]
    pub skew: String,
    /// Zipf exponent or needle probability.
    pub skew_param: Option<f64>,
    #[serde(default = "default_xr_domain")]
    pub xr_domain_size: usize,
    #[serde(default = "default_n_s")]
    pub n_s: usize,
    #[serde(default = "default_n_r")]
    pub n_r: usize,
    #[serde(default = "default_d")]
    pub d_s: usize,
    #[serde(default = "default_d")]
    pub d_r: usize,
    #[serde(default = "default_axis")]
    pub axis: String,
    /// Defaults to the axis' standard values.
    pub values: Option<Vec<f64>>,
    #[serde(default = "default_families")]
    pub families: Vec<String>,
    #[serde(default = "default_approaches")]
    pub approaches: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    #[serde(default = "default_families")]
    pub families: Vec<String>,
    #[serde(default = "default_approaches")]
    pub approaches: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdviseSection {
    #[serde(default = "default_family")]
    pub family: String,
    pub thresholds: Option<ThresholdTable>,
    /// Training rows; defaults to the training share of the fact table.
    pub train_rows: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompressSection {
    /// FK column to compress.
    pub fk: String,
    pub budget: usize,
    /// `sort` or `random`.
    pub method: String,
    /// Also re-tune and report holdout accuracy with this family.
    pub evaluate_family: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SmoothSection {
    pub fk: String,
    /// `random` or `xr`.
    pub method: String,
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub runs: Option<usize>,
    pub out: Option<PathBuf>,
    pub jobs: Option<usize>,
}

impl ExperimentConfig {
    /// Reads a config, resolves the manifest path against the config's
    /// directory, applies overrides, and validates it for `mode`.
    pub fn load(path: &Path, mode: Mode, overrides: &Overrides) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("cannot read config {}", path.display()))?;
        let mut cfg: ExperimentConfig =
            toml::from_str(&text).with_context(|| format!("malformed config {}", path.display()))?;
        // file paths are relative to the config; command-line ones to the cwd
        let dir = path.parent().unwrap_or(Path::new("."));
        if let Some(m) = &cfg.manifest {
            if m.is_relative() {
                cfg.manifest = Some(dir.join(m));
            }
        }
        if cfg.out.is_relative() {
            cfg.out = dir.join(&cfg.out);
        }
        cfg.apply(overrides);
        cfg.validate(mode)?;
        Ok(cfg)
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(s) = o.seed {
            self.seed = s;
        }
        if let Some(r) = o.runs {
            self.runs = r;
        }
        if let Some(out) = &o.out {
            self.out = out.clone();
        }
        if o.jobs.is_some() {
            self.jobs = o.jobs;
        }
    }

    pub fn validate(&self, mode: Mode) -> Result<()> {
        if let Some(m) = self.mode {
            if m != mode {
                bail!("config declares mode `{}` but `{}` was requested", m.name(), mode.name());
            }
        }
        if i64::try_from(self.seed).is_err() {
            bail!("seed must be at most {}", i64::MAX);
        }
        if self.runs == 0 {
            bail!("runs must be at least 1");
        }
        if self.jobs == Some(0) {
            bail!("jobs must be at least 1");
        }
        let needs_manifest = mode != Mode::Simulate;
        if needs_manifest {
            let m = self
                .manifest
                .as_ref()
                .ok_or_else(|| anyhow!("mode `{}` needs a `manifest`", mode.name()))?;
            if !m.is_file() {
                bail!("manifest {} does not exist", m.display());
            }
        }
        match mode {
            Mode::Simulate => {
                let s = self.simulation()?;
                self.scenario()?;
                parse_families(&s.families)?;
                parse_views(&s.approaches)?;
                self.sweep_values()?;
            }
            Mode::Experiment => {
                let e = self.experiment_section();
                parse_families(&e.families)?;
                parse_views(&e.approaches)?;
            }
            Mode::Advise => {
                parse_family(&self.advise_section().family)?;
            }
            Mode::Compress => {
                let c = self.compress.as_ref().ok_or_else(|| anyhow!("mode `compress` needs a [compress] section"))?;
                if !matches!(c.method.as_str(), "sort" | "random") {
                    bail!("compression method must be `sort` or `random`, got `{}`", c.method);
                }
                if let Some(f) = &c.evaluate_family {
                    parse_family(f)?;
                }
            }
            Mode::Smooth => {
                let s = self.smooth.as_ref().ok_or_else(|| anyhow!("mode `smooth` needs a [smooth] section"))?;
                if !matches!(s.method.as_str(), "random" | "xr") {
                    bail!("smoothing method must be `random` or `xr`, got `{}`", s.method);
                }
            }
        }
        Ok(())
    }

    pub fn simulation(&self) -> Result<&SimulateSection> {
        self.simulate
            .as_ref()
            .ok_or_else(|| anyhow!("mode `simulate` needs a [simulate] section"))
    }

    pub fn experiment_section(&self) -> ExperimentSection {
        self.experiment.clone().unwrap_or(ExperimentSection {
            families: default_families(),
            approaches: default_approaches(),
        })
    }

    pub fn advise_section(&self) -> AdviseSection {
        self.advise.clone().unwrap_or(AdviseSection {
            family: default_family(),
            thresholds: None,
            train_rows: None,
        })
    }

    pub fn sim_config(&self) -> Result<SimConfig> {
        let s = self.simulation()?;
        let cfg = SimConfig {
            n_s: s.n_s,
            n_r: s.n_r,
            d_s: s.d_s,
            d_r: s.d_r,
            seed: self.seed,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn scenario(&self) -> Result<ScenarioSpec> {
        let s = self.simulation()?;
        let kind = match s.scenario.to_ascii_lowercase().as_str() {
            "onexr" => ScenarioKind::OneXr { p: s.p },
            "xsxr" => ScenarioKind::XsXr,
            "reponexr" => ScenarioKind::RepOneXr { p: s.p },
            other => bail!("unknown scenario `{other}`"),
        };
        let fk_skew = match (s.skew.as_str(), s.skew_param) {
            ("uniform", _) => SkewSpec::Uniform,
            ("zipf", Some(s)) => SkewSpec::Zipf { s },
            ("needle", Some(p)) => SkewSpec::NeedleThread { needle_prob: p },
            ("zipf" | "needle", None) => bail!("skew `{}` needs `skew_param`", s.skew),
            (other, _) => bail!("unknown skew `{other}`"),
        };
        let spec = ScenarioSpec {
            kind,
            fk_skew,
            xr_domain_size: s.xr_domain_size,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn sweep_axis(&self) -> Result<SweepAxis> {
        let s = self.simulation()?;
        SweepAxis::parse(&s.axis).ok_or_else(|| anyhow!("unknown sweep axis `{}`", s.axis))
    }

    pub fn sweep_values(&self) -> Result<Vec<f64>> {
        let axis = self.sweep_axis()?;
        let values = self.simulation()?.values.clone().unwrap_or_else(|| axis.default_values());
        if values.is_empty() {
            bail!("sweep has no values");
        }
        let (cfg, spec) = (self.sim_config()?, self.scenario()?);
        for &v in &values {
            axis.apply(cfg, spec, v)
                .map_err(|e| anyhow!("sweep value {v}: {e}"))?;
        }
        Ok(values)
    }
}

pub fn parse_family(s: &str) -> Result<ModelFamily> {
    ModelFamily::parse(s).ok_or_else(|| anyhow!("unknown model family `{s}`"))
}

pub fn parse_families(list: &[String]) -> Result<Vec<ModelFamily>> {
    if list.is_empty() {
        bail!("no model families given");
    }
    list.iter().map(|s| parse_family(s)).collect()
}

/// `JoinAll`, `NoJoin`, `NoFK`, or `drop:1,3` for dropping dimensions by
/// zero-based index.
pub fn parse_view(s: &str) -> Result<FeatureView> {
    Ok(match s {
        "JoinAll" => FeatureView::JoinAll,
        "NoJoin" => FeatureView::NoJoin,
        "NoFK" => FeatureView::NoFK,
        _ => {
            let list = s
                .strip_prefix("drop:")
                .ok_or_else(|| anyhow!("unknown approach `{s}`"))?;
            let dropped_dims = list
                .split(',')
                .map(|d| d.trim().parse::<usize>().with_context(|| format!("bad dimension index in `{s}`")))
                .collect::<Result<BTreeSet<_>>>()?;
            FeatureView::Custom { dropped_dims }
        }
    })
}

pub fn parse_views(list: &[String]) -> Result<Vec<FeatureView>> {
    if list.is_empty() {
        bail!("no approaches given");
    }
    list.iter().map(|s| parse_view(s)).collect()
}
