//! Synthetic star schemas with a known Bayes-optimal classifier.

use std::sync::Arc;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Zipf;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::relational::{CategoricalDomain, Column, DimensionTable, FactTable, StarSchema};

/// Largest `d_s + d_r` the XSXR probability table may span.
pub const MAX_PATTERN_BITS: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SimConfig {
    /// Training examples.
    pub n_s: usize,
    /// Dimension rows, i.e. the FK domain size.
    pub n_r: usize,
    pub d_s: usize,
    pub d_r: usize,
    pub seed: u64,
}

impl SimConfig {
    /// `(n_s, n_r, d_s, d_r) = (1000, 40, 4, 4)`.
    pub fn default_with_seed(seed: u64) -> Self {
        Self {
            n_s: 1000,
            n_r: 40,
            d_s: 4,
            d_r: 4,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_r < 2 || self.n_s < 1 || self.d_r < 1 {
            return Err(Error::InvalidParameter(format!(
                "simulation needs n_r >= 2, n_s >= 1 and d_r >= 1, got {self:?}"
            )));
        }
        Ok(())
    }

    /// Validation and test set size.
    pub fn holdout_size(&self) -> usize {
        (self.n_s / 4).max(1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum SkewSpec {
    Uniform,
    /// `P(rank k) ∝ k^(-s)`, rank 1 being code 0.
    Zipf { s: f64 },
    /// Code 0 with `needle_prob`, the rest uniform over the other codes.
    NeedleThread { needle_prob: f64 },
}

impl SkewSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            SkewSpec::Uniform => Ok(()),
            SkewSpec::Zipf { s } if s >= 0.0 && s.is_finite() => Ok(()),
            SkewSpec::NeedleThread { needle_prob } if (0.0..=1.0).contains(&needle_prob) => Ok(()),
            other => Err(Error::InvalidParameter(format!("invalid skew {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ScenarioKind {
    /// Y depends on the first foreign feature only, flipped with probability `p`.
    OneXr { p: f64 },
    /// Y is a deterministic function of all home and foreign features.
    XsXr,
    /// As `OneXr`, with every foreign feature a copy of the first.
    RepOneXr { p: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub kind: ScenarioKind,
    pub fk_skew: SkewSpec,
    /// Domain size of the label-bearing foreign feature.
    pub xr_domain_size: usize,
}

impl ScenarioSpec {
    pub fn onexr(p: f64) -> Self {
        Self {
            kind: ScenarioKind::OneXr { p },
            fk_skew: SkewSpec::Uniform,
            xr_domain_size: 2,
        }
    }

    pub fn xsxr() -> Self {
        Self {
            kind: ScenarioKind::XsXr,
            fk_skew: SkewSpec::Uniform,
            xr_domain_size: 2,
        }
    }

    pub fn reponexr(p: f64) -> Self {
        Self {
            kind: ScenarioKind::RepOneXr { p },
            fk_skew: SkewSpec::Uniform,
            xr_domain_size: 2,
        }
    }

    pub fn with_skew(mut self, skew: SkewSpec) -> Self {
        self.fk_skew = skew;
        self
    }

    pub fn name(&self) -> &'static str {
        match self.kind {
            ScenarioKind::OneXr { .. } => "OneXr",
            ScenarioKind::XsXr => "XSXR",
            ScenarioKind::RepOneXr { .. } => "RepOneXr",
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let ScenarioKind::OneXr { p } | ScenarioKind::RepOneXr { p } = self.kind {
            if !(0.0..=0.5).contains(&p) {
                return Err(Error::InvalidParameter(format!("p must lie in [0, 0.5], got {p}")));
            }
        }
        if self.xr_domain_size < 2 {
            return Err(Error::InvalidParameter("xr_domain_size must be at least 2".into()));
        }
        self.fk_skew.validate()
    }
}

/// Draws `n` FK codes in `0..n_r`.
pub fn sample_fk(skew: &SkewSpec, n: usize, n_r: usize, seed: u64) -> Result<Vec<u32>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    FkSampler::new(skew, n_r)?.sample_n(&mut rng, n)
}

enum FkSampler {
    Uniform(u32),
    Zipf(Zipf<f64>),
    Needle { p: f64, n_r: u32 },
}

impl FkSampler {
    fn new(skew: &SkewSpec, n_r: usize) -> Result<Self> {
        skew.validate()?;
        if n_r < 1 {
            return Err(Error::InvalidDimension("FK domain must be non-empty".into()));
        }
        Ok(match *skew {
            SkewSpec::Uniform => FkSampler::Uniform(n_r as u32),
            SkewSpec::Zipf { s } => FkSampler::Zipf(
                Zipf::new(n_r as f64, s).map_err(|e| Error::InvalidParameter(format!("zipf: {e}")))?,
            ),
            SkewSpec::NeedleThread { needle_prob } => {
                if n_r == 1 && needle_prob < 1.0 {
                    return Err(Error::InvalidParameter(
                        "needle-and-thread skew needs a second code for the thread".into(),
                    ));
                }
                FkSampler::Needle {
                    p: needle_prob,
                    n_r: n_r as u32,
                }
            }
        })
    }

    fn sample<R: Rng>(&self, rng: &mut R) -> u32 {
        match self {
            FkSampler::Uniform(n) => rng.random_range(0..*n),
            FkSampler::Zipf(z) => (z.sample(rng) as u32).saturating_sub(1),
            FkSampler::Needle { p, n_r } => {
                if rng.random_bool(*p) {
                    0
                } else {
                    rng.random_range(1..*n_r)
                }
            }
        }
    }

    fn sample_n<R: Rng>(&self, rng: &mut R, n: usize) -> Result<Vec<u32>> {
        Ok((0..n).map(|_| self.sample(rng)).collect())
    }
}

/// A fact sample over a fixed dimension table, with the Bayes-optimal label
/// of every row.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub star: StarSchema,
    pub optimal: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedSplits {
    pub train: Sample,
    pub validation: Sample,
    pub test: Sample,
}

#[derive(Debug, Clone)]
enum Truth {
    /// Label flipped from the preferred one with probability `p`.
    Noisy { p: f64 },
    /// Probability table over `[X_S, X_R]` bit patterns (X_S bits low) with a
    /// fixed label per pattern; `rids_of[x_r]` lists the keys carrying `x_r`.
    Table {
        weights: WeightedIndex<f64>,
        probs: Vec<f64>,
        labels: Vec<u8>,
        rids_of: Vec<Vec<u32>>,
    },
}

/// A scenario with its dimension table drawn; fact samples are drawn from it
/// on demand.
#[derive(Debug, Clone)]
pub struct World {
    cfg: SimConfig,
    spec: ScenarioSpec,
    dim: DimensionTable,
    /// Foreign feature codes per dimension row.
    xr_rows: Vec<Vec<u32>>,
    bin: Arc<CategoricalDomain>,
    rid: Arc<CategoricalDomain>,
    truth: Truth,
}

fn bin_domain() -> Arc<CategoricalDomain> {
    Arc::new(CategoricalDomain::indexed("bool", 2).expect("non-empty"))
}

impl World {
    /// Draws the dimension table of `spec` from `cfg.seed`.
    pub fn new(cfg: SimConfig, spec: ScenarioSpec) -> Result<Self> {
        cfg.validate()?;
        spec.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let bin = bin_domain();
        let rid = Arc::new(CategoricalDomain::indexed("rid", cfg.n_r)?);
        let (xr_rows, truth, xr0_domain) = match spec.kind {
            ScenarioKind::OneXr { p } | ScenarioKind::RepOneXr { p } => {
                let k = spec.xr_domain_size as u32;
                let replicate = matches!(spec.kind, ScenarioKind::RepOneXr { .. });
                let rows = (0..cfg.n_r)
                    .map(|_| {
                        let xr = rng.random_range(0..k);
                        (0..cfg.d_r)
                            .map(|i| match (i, replicate) {
                                (0, _) | (_, true) => xr,
                                _ => rng.random_range(0..2),
                            })
                            .collect()
                    })
                    .collect();
                let xr0 = if k == 2 {
                    Arc::clone(&bin)
                } else {
                    Arc::new(CategoricalDomain::indexed("xr_domain", k as usize)?)
                };
                (rows, Truth::Noisy { p }, xr0)
            }
            ScenarioKind::XsXr => {
                let (rows, truth) = xsxr_tables(&cfg, &mut rng)?;
                (rows, truth, Arc::clone(&bin))
            }
        };
        let replicated = matches!(spec.kind, ScenarioKind::RepOneXr { .. });
        let features = (0..cfg.d_r)
            .map(|i| {
                let dom = if i == 0 || replicated {
                    Arc::clone(&xr0_domain)
                } else {
                    Arc::clone(&bin)
                };
                Column::new(format!("xr{i}"), dom, xr_rows.iter().map(|r: &Vec<u32>| r[i]).collect())
            })
            .collect::<Result<Vec<_>>>()?;
        let dim = DimensionTable::new("R", Arc::clone(&rid), features)?;
        Ok(Self {
            cfg,
            spec,
            dim,
            xr_rows,
            bin,
            rid,
            truth,
        })
    }

    pub fn config(&self) -> &SimConfig {
        &self.cfg
    }

    pub fn spec(&self) -> &ScenarioSpec {
        &self.spec
    }

    pub fn dimension(&self) -> &DimensionTable {
        &self.dim
    }

    /// Bayes-optimal label for a value of the label-bearing foreign feature.
    fn preferred_label(&self, xr: u32) -> u8 {
        // lower half of the domain leans to Y = 1, upper half to Y = 0
        u8::from(2 * xr < self.spec.xr_domain_size as u32)
    }

    /// Renormalized probability of every `[X_S, X_R]` pattern (XSXR only).
    pub fn pattern_probabilities(&self) -> Option<&[f64]> {
        match &self.truth {
            Truth::Table { probs, .. } => Some(probs),
            Truth::Noisy { .. } => None,
        }
    }

    /// Draws `n` fact rows.
    pub fn sample(&self, n: usize, seed: u64) -> Result<Sample> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cfg = &self.cfg;
        let mut home = vec![Vec::with_capacity(n); cfg.d_s];
        let mut fk = Vec::with_capacity(n);
        let mut target = Vec::with_capacity(n);
        let mut optimal = Vec::with_capacity(n);
        match &self.truth {
            Truth::Noisy { p } => {
                let sampler = FkSampler::new(&self.spec.fk_skew, cfg.n_r)?;
                for _ in 0..n {
                    for col in home.iter_mut() {
                        col.push(rng.random_range(0..2));
                    }
                    let k = sampler.sample(&mut rng);
                    let best = self.preferred_label(self.xr_rows[k as usize][0]);
                    let flip = rng.random_bool(*p);
                    fk.push(k);
                    optimal.push(best);
                    target.push(if flip { 1 - best } else { best });
                }
            }
            Truth::Table {
                weights,
                labels,
                rids_of,
                ..
            } => {
                for _ in 0..n {
                    let pat = weights.sample(&mut rng);
                    for (i, col) in home.iter_mut().enumerate() {
                        col.push(((pat >> i) & 1) as u32);
                    }
                    let rids = &rids_of[pat >> cfg.d_s];
                    fk.push(rids[rng.random_range(0..rids.len())]);
                    optimal.push(labels[pat]);
                    target.push(labels[pat]);
                }
            }
        }
        let home = home
            .into_iter()
            .enumerate()
            .map(|(i, codes)| Column::new(format!("xs{i}"), Arc::clone(&self.bin), codes))
            .collect::<Result<Vec<_>>>()?;
        let fk = Column::new("fk", Arc::clone(&self.rid), fk)?;
        let fact = FactTable::new((0..n as u64).collect(), target, home, vec![fk])?;
        Ok(Sample {
            star: StarSchema::in_order(fact, vec![self.dim.clone()])?,
            optimal,
        })
    }

    /// Training, validation and test samples of sizes `n_s`, `n_s/4`, `n_s/4`.
    pub fn splits(&self, seed: u64) -> Result<GeneratedSplits> {
        let h = self.cfg.holdout_size();
        Ok(GeneratedSplits {
            train: self.sample(self.cfg.n_s, mix(seed, 0))?,
            validation: self.sample(h, mix(seed, 1))?,
            test: self.sample(h, mix(seed, 2))?,
        })
    }
}

fn xsxr_tables(cfg: &SimConfig, rng: &mut ChaCha8Rng) -> Result<(Vec<Vec<u32>>, Truth)> {
    let bits = cfg.d_s + cfg.d_r;
    if bits > MAX_PATTERN_BITS {
        return Err(Error::InvalidParameter(format!(
            "XSXR tabulates 2^{bits} patterns; at most 2^{MAX_PATTERN_BITS} are supported"
        )));
    }
    let n_pat = 1usize << bits;
    let n_s_pat = 1usize << cfg.d_s;
    let n_r_pat = 1usize << cfg.d_r;
    let raw: Vec<f64> = (0..n_pat).map(|_| rng.random::<f64>()).collect();
    let labels: Vec<u8> = (0..n_pat).map(|_| rng.random_range(0..2)).collect();
    // X_R marginal, then R drawn from it with sequential keys
    let mut marginal = vec![0.0; n_r_pat];
    for (pat, &w) in raw.iter().enumerate() {
        marginal[pat / n_s_pat] += w;
    }
    let pick = WeightedIndex::new(&marginal).map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let mut rids_of = vec![Vec::new(); n_r_pat];
    let rows: Vec<Vec<u32>> = (0..cfg.n_r)
        .map(|rid| {
            let xr = pick.sample(rng);
            rids_of[xr].push(rid as u32);
            (0..cfg.d_r).map(|i| ((xr >> i) & 1) as u32).collect()
        })
        .collect();
    let mut probs: Vec<f64> = raw
        .iter()
        .enumerate()
        .map(|(pat, &w)| if rids_of[pat / n_s_pat].is_empty() { 0.0 } else { w })
        .collect();
    let total: f64 = probs.iter().sum();
    probs.iter_mut().for_each(|p| *p /= total);
    let weights = WeightedIndex::new(&probs).map_err(|e| Error::InvalidParameter(e.to_string()))?;
    Ok((
        rows,
        Truth::Table {
            weights,
            probs,
            labels,
            rids_of,
        },
    ))
}

/// Builds a world from `cfg.seed` and draws one set of splits from it.
fn generate(cfg: SimConfig, spec: ScenarioSpec) -> Result<GeneratedSplits> {
    World::new(cfg, spec)?.splits(mix(cfg.seed, 0x5eed))
}

pub fn gen_onexr(cfg: SimConfig, spec: ScenarioSpec) -> Result<GeneratedSplits> {
    if !matches!(spec.kind, ScenarioKind::OneXr { .. }) {
        return Err(Error::InvalidParameter("gen_onexr needs a OneXr scenario".into()));
    }
    generate(cfg, spec)
}

pub fn gen_xsxr(cfg: SimConfig) -> Result<GeneratedSplits> {
    generate(cfg, ScenarioSpec::xsxr())
}

pub fn gen_reponexr(cfg: SimConfig, spec: ScenarioSpec) -> Result<GeneratedSplits> {
    if !matches!(spec.kind, ScenarioKind::RepOneXr { .. }) {
        return Err(Error::InvalidParameter("gen_reponexr needs a RepOneXr scenario".into()));
    }
    generate(cfg, spec)
}

/// SplitMix64 finalizer applied to `a ^ (b + golden)`; derives child seeds.
pub fn mix(a: u64, b: u64) -> u64 {
    let mut z = a ^ b.wrapping_add(0x9e37_79b9_7f4a_7c15).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::relational::{apply_feature_view, materialize_join, FeatureView};
    use std::collections::HashMap;

    fn xr_of(s: &Sample) -> Vec<u32> {
        let j = materialize_join(&s.star).unwrap().data;
        let f = j.feature_index("xr0").unwrap();
        (0..j.n_rows()).map(|r| j.value(r, f)).collect()
    }

    #[test]
    fn onexr_noise_free_at_p_zero() {
        let g = gen_onexr(SimConfig::default_with_seed(1), ScenarioSpec::onexr(0.0)).unwrap();
        for s in [&g.train, &g.validation, &g.test] {
            let xr = xr_of(s);
            for (y, x) in s.star.fact().target().iter().zip(xr) {
                assert_eq!(*y as u32, 1 - x);
            }
        }
        assert_eq!(g.validation.star.fact().n_rows(), 250);
        assert_eq!(g.test.star.fact().n_rows(), 250);
    }

    #[test]
    fn onexr_noise_rate() {
        let g = gen_onexr(SimConfig::default_with_seed(2), ScenarioSpec::onexr(0.1)).unwrap();
        let xr = xr_of(&g.train);
        let flips = g.train.star.fact().target().iter().zip(&xr).filter(|(y, x)| **y as u32 != 1 - **x).count();
        let rate = flips as f64 / xr.len() as f64;
        assert!((rate - 0.1).abs() <= 0.03, "{rate}");
    }

    #[test]
    fn generation_is_deterministic() {
        let cfg = SimConfig::default_with_seed(3);
        assert_eq!(gen_onexr(cfg, ScenarioSpec::onexr(0.1)).unwrap(), gen_onexr(cfg, ScenarioSpec::onexr(0.1)).unwrap());
        assert_eq!(gen_xsxr(cfg).unwrap(), gen_xsxr(cfg).unwrap());
    }

    #[test]
    fn reponexr_replicates() {
        let g = gen_reponexr(SimConfig::default_with_seed(4), ScenarioSpec::reponexr(0.0)).unwrap();
        let feats = g.train.star.dims()[0].features().unwrap();
        for r in 0..40 {
            assert!(feats.iter().all(|c| c.codes[r] == feats[0].codes[r]));
        }
        let j = materialize_join(&g.train.star).unwrap().data;
        let f = j.feature_index("xr3").unwrap();
        for r in 0..j.n_rows() {
            assert_eq!(j.labels()[r] as u32, 1 - j.value(r, f));
        }
    }

    #[test]
    fn xsxr_is_deterministic_and_consistent() {
        let cfg = SimConfig::default_with_seed(5);
        let world = World::new(cfg, ScenarioSpec::xsxr()).unwrap();
        let total: f64 = world.pattern_probabilities().unwrap().iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
        let s = world.sample(2000, 9).unwrap();
        let j = apply_feature_view(&s.star, &FeatureView::NoFK).unwrap();
        let mut seen: HashMap<Vec<u32>, u8> = HashMap::new();
        for r in 0..j.n_rows() {
            let y = *seen.entry(j.row(r)).or_insert(j.labels()[r]);
            assert_eq!(y, j.labels()[r], "H(Y | X_S, X_R) must be 0");
        }
        assert_eq!(s.optimal, s.star.fact().target());
    }

    #[test]
    fn xsxr_pattern_limit() {
        let cfg = SimConfig {
            d_s: 12,
            d_r: 9,
            ..SimConfig::default_with_seed(0)
        };
        assert!(gen_xsxr(cfg).is_err());
    }

    #[test]
    fn larger_xr_domain() {
        let spec = ScenarioSpec {
            xr_domain_size: 5,
            ..ScenarioSpec::onexr(0.0)
        };
        let g = gen_onexr(SimConfig::default_with_seed(6), spec).unwrap();
        let xr = xr_of(&g.train);
        assert!(xr.iter().any(|&v| v >= 2));
        for (y, x) in g.train.star.fact().target().iter().zip(xr) {
            assert_eq!(*y, u8::from(x < 3));
        }
    }

    #[test]
    fn fk_sampling_edge_cases() {
        assert!(sample_fk(&SkewSpec::NeedleThread { needle_prob: 1.0 }, 100, 5, 1).unwrap().iter().all(|&k| k == 0));
        assert!(sample_fk(&SkewSpec::NeedleThread { needle_prob: 0.5 }, 10, 1, 1).is_err());
        assert!(sample_fk(&SkewSpec::NeedleThread { needle_prob: 1.0 }, 10, 1, 1).is_ok());
        assert!(sample_fk(&SkewSpec::Zipf { s: -1.0 }, 10, 4, 1).is_err());
        assert!(sample_fk(&SkewSpec::Uniform, 1000, 7, 2).unwrap().iter().all(|&k| k < 7));
    }

    #[test]
    fn zipf_rank_one_frequency() {
        let n = 100_000;
        let draws = sample_fk(&SkewSpec::Zipf { s: 2.0 }, n, 40, 11).unwrap();
        let h: f64 = (1..=40).map(|k| (k as f64).powi(-2)).sum();
        let freq = draws.iter().filter(|&&k| k == 0).count() as f64 / n as f64;
        assert!((freq - 1.0 / h).abs() <= 0.02 / h, "{freq} vs {}", 1.0 / h);
    }

    #[test]
    fn zipf_zero_is_uniform() {
        let n = 100_000;
        let k = 10;
        let draws = sample_fk(&SkewSpec::Zipf { s: 0.0 }, n, k, 12).unwrap();
        let mut counts = vec![0usize; k];
        draws.iter().for_each(|&d| counts[d as usize] += 1);
        let e = n as f64 / k as f64;
        let chi2: f64 = counts.iter().map(|&c| (c as f64 - e).powi(2) / e).sum();
        // 99.9% quantile of chi-square with 9 degrees of freedom
        assert!(chi2 < 27.88, "{chi2}");
    }
}
