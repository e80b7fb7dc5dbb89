//! Foreign-key domain compression and smoothing of FK values unseen in
//! training.

use std::collections::BTreeMap;
use std::sync::Arc;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::classifiers::{accuracy, grid_search, HyperGrid};
use crate::error::{Error, Result};
use crate::relational::{
    apply_feature_view, CategoricalDomain, Column, Dataset, DimensionTable, FeatureRole, FeatureView, StarSchema,
};
use crate::simulation::{mix, World};

/// Number of random hashes averaged when evaluating random compression.
pub const RANDOM_HASH_REPEATS: usize = 5;

/// `H(Y | FK)` and its per-value terms.
#[derive(Debug, Clone, PartialEq)]
pub struct EntropyTable {
    /// `Σ_z P(z) H(Y | FK = z)` in bits.
    pub total: f64,
    /// `H(Y | FK = z)`; 1 for values absent from the data.
    pub per_value: Vec<f64>,
    /// Class counts per value.
    pub counts: Vec<[usize; 2]>,
}

impl EntropyTable {
    pub fn is_seen(&self, code: u32) -> bool {
        let c = self.counts[code as usize];
        c[0] + c[1] > 0
    }
}

fn entropy_bits(c: [usize; 2]) -> f64 {
    let n = (c[0] + c[1]) as f64;
    c.iter()
        .filter(|&&k| k > 0)
        .map(|&k| {
            let p = k as f64 / n;
            -p * p.log2()
        })
        .sum()
}

/// Conditional entropy of binary labels given FK codes in `0..domain_size`.
pub fn conditional_entropy(labels: &[u8], fk: &[u32], domain_size: usize) -> Result<EntropyTable> {
    if labels.is_empty() {
        return Err(Error::Empty("conditional entropy of no rows".into()));
    }
    if labels.len() != fk.len() {
        return Err(Error::DimensionMismatch {
            expected: labels.len(),
            actual: fk.len(),
        });
    }
    let mut counts = vec![[0usize; 2]; domain_size];
    for (&y, &z) in labels.iter().zip(fk) {
        let slot = counts.get_mut(z as usize).ok_or_else(|| {
            Error::InvalidParameter(format!("FK code {z} outside a domain of size {domain_size}"))
        })?;
        slot[usize::from(y == 1)] += 1;
    }
    let n = labels.len() as f64;
    let per_value: Vec<f64> = counts
        .iter()
        .map(|&c| if c[0] + c[1] == 0 { 1.0 } else { entropy_bits(c) })
        .collect();
    let total = counts
        .iter()
        .zip(&per_value)
        .map(|(c, h)| (c[0] + c[1]) as f64 / n * h)
        .sum();
    Ok(EntropyTable {
        total,
        per_value,
        counts,
    })
}

/// A map `[m] → [l]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CompressionMap {
    budget: usize,
    mapping: Vec<u32>,
}

impl CompressionMap {
    pub fn new(budget: usize, mapping: Vec<u32>) -> Result<Self> {
        if budget == 0 || budget > mapping.len() {
            return Err(Error::InvalidParameter(format!(
                "budget {budget} must lie in 1..={}",
                mapping.len()
            )));
        }
        if let Some(&b) = mapping.iter().find(|&&b| b as usize >= budget) {
            return Err(Error::InvalidParameter(format!("bucket {b} exceeds budget {budget}")));
        }
        Ok(Self { budget, mapping })
    }

    pub fn source_size(&self) -> usize {
        self.mapping.len()
    }

    pub fn budget(&self) -> usize {
        self.budget
    }

    pub fn mapping(&self) -> &[u32] {
        &self.mapping
    }

    pub fn image_size(&self) -> usize {
        let mut seen = vec![false; self.budget];
        self.mapping.iter().for_each(|&b| seen[b as usize] = true);
        seen.iter().filter(|&&s| s).count()
    }

    pub fn apply(&self, codes: &[u32]) -> Result<Vec<u32>> {
        codes
            .iter()
            .map(|&c| {
                self.mapping.get(c as usize).copied().ok_or_else(|| {
                    Error::InvalidParameter(format!("code {c} outside a domain of size {}", self.mapping.len()))
                })
            })
            .collect()
    }

    /// Two-column CSV `source_code,target_code`.
    pub fn to_csv(&self) -> String {
        pairs_csv(self.mapping.iter().enumerate().map(|(s, &t)| (s as u32, t)))
    }
}

fn pairs_csv(pairs: impl Iterator<Item = (u32, u32)>) -> String {
    let mut out = String::from("source_code,target_code\n");
    for (s, t) in pairs {
        out.push_str(&format!("{s},{t}\n"));
    }
    out
}

fn check_budget(m: usize, l: usize) -> Result<()> {
    if l == 0 || l > m {
        return Err(Error::InvalidParameter(format!("need 1 <= l <= m, got l = {l}, m = {m}")));
    }
    Ok(())
}

/// Hashes every code independently and uniformly into `[l]`.
pub fn compress_random(m: usize, l: usize, seed: u64) -> Result<CompressionMap> {
    check_budget(m, l)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    CompressionMap::new(l, (0..m).map(|_| rng.random_range(0..l as u32)).collect())
}

/// How equal gaps between sorted entropies are ranked.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CutTies {
    Earliest,
    Random { seed: u64 },
}

/// Sorts codes by `H(Y | FK = z)` on the training data and cuts the sorted
/// order at its `l - 1` largest adjacent differences. Unseen codes sort
/// after seen ones.
pub fn compress_sort_based(labels: &[u8], fk: &[u32], m: usize, l: usize) -> Result<CompressionMap> {
    compress_sort_based_with(labels, fk, m, l, CutTies::Earliest)
}

pub fn compress_sort_based_with(labels: &[u8], fk: &[u32], m: usize, l: usize, ties: CutTies) -> Result<CompressionMap> {
    check_budget(m, l)?;
    let table = conditional_entropy(labels, fk, m)?;
    let mut order: Vec<u32> = (0..m as u32).collect();
    order.sort_by(|&a, &b| {
        (!table.is_seen(a), table.per_value[a as usize], a)
            .partial_cmp(&(!table.is_seen(b), table.per_value[b as usize], b))
            .expect("entropies are finite")
    });
    // boundary k sits between sorted positions k and k + 1
    let mut boundaries: Vec<usize> = (0..m - 1).collect();
    if let CutTies::Random { seed } = ties {
        boundaries.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    }
    let diff = |k: usize| table.per_value[order[k + 1] as usize] - table.per_value[order[k] as usize];
    // stable sort keeps the earliest (or shuffled) boundary first among ties
    boundaries.sort_by(|&a, &b| diff(b).partial_cmp(&diff(a)).expect("finite"));
    let mut cuts = boundaries[..l - 1].to_vec();
    cuts.sort_unstable();
    let mut mapping = vec![0u32; m];
    let mut bucket = 0u32;
    let mut next_cut = cuts.iter().peekable();
    for (pos, &code) in order.iter().enumerate() {
        mapping[code as usize] = bucket;
        if next_cut.peek() == Some(&&pos) {
            next_cut.next();
            bucket += 1;
        }
    }
    CompressionMap::new(l, mapping)
}

/// Replaces feature `feature` of `data` by its compressed codes.
pub fn compress_feature(data: &Dataset, feature: usize, map: &CompressionMap) -> Result<Dataset> {
    let col = data
        .columns()
        .get(feature)
        .ok_or_else(|| Error::InvalidParameter(format!("no feature {feature}")))?;
    if col.domain.len() != map.source_size() {
        return Err(Error::DimensionMismatch {
            expected: map.source_size(),
            actual: col.domain.len(),
        });
    }
    let domain = Arc::new(CategoricalDomain::indexed(format!("{}_compressed", col.name), map.budget())?);
    data.with_column(feature, Column::new(col.name.clone(), domain, map.apply(&col.codes)?)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CompressionMethod {
    Random,
    SortBased,
}

/// Holdout accuracy of a model re-tuned after compressing one feature.
#[derive(Debug, Clone, PartialEq)]
pub struct CompressionEval {
    pub budget: usize,
    pub method: CompressionMethod,
    pub test_accuracy: f64,
    /// `H(Y | f(FK))` on the training split, averaged like the accuracy.
    pub train_entropy: f64,
}

/// Builds the map on `train`, recodes all three splits, grid-searches on
/// `validation`, and reports `test` accuracy. Random hashing is averaged
/// over [`RANDOM_HASH_REPEATS`] seeds derived from `seed`.
#[allow(clippy::too_many_arguments)]
pub fn evaluate_compression(
    train: &Dataset,
    validation: &Dataset,
    test: &Dataset,
    feature: usize,
    budget: usize,
    method: CompressionMethod,
    grid: &HyperGrid,
    seed: u64,
) -> Result<CompressionEval> {
    let m = train
        .columns()
        .get(feature)
        .ok_or_else(|| Error::InvalidParameter(format!("no feature {feature}")))?
        .domain
        .len();
    let maps = match method {
        CompressionMethod::SortBased => {
            vec![compress_sort_based(train.labels(), &train.columns()[feature].codes, m, budget)?]
        }
        CompressionMethod::Random => (0..RANDOM_HASH_REPEATS as u64)
            .map(|r| compress_random(m, budget, mix(seed, r)))
            .collect::<Result<_>>()?,
    };
    let (mut acc, mut ent) = (0.0, 0.0);
    for map in &maps {
        let tr = compress_feature(train, feature, map)?;
        let va = compress_feature(validation, feature, map)?;
        let te = compress_feature(test, feature, map)?;
        let out = grid_search(&tr, &va, grid)?;
        acc += accuracy(&out.model.predict_dataset(&te)?, te.labels());
        ent += conditional_entropy(tr.labels(), &tr.columns()[feature].codes, budget)?.total;
    }
    let k = maps.len() as f64;
    Ok(CompressionEval {
        budget,
        method,
        test_accuracy: acc / k,
        train_entropy: ent / k,
    })
}

/// Reassignment of unseen FK codes to codes observed in training.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SmoothingMap {
    reassignment: BTreeMap<u32, u32>,
}

impl SmoothingMap {
    pub fn reassignment(&self) -> &BTreeMap<u32, u32> {
        &self.reassignment
    }

    pub fn len(&self) -> usize {
        self.reassignment.len()
    }

    pub fn is_empty(&self) -> bool {
        self.reassignment.is_empty()
    }

    /// Maps reassigned codes and leaves the rest unchanged.
    pub fn apply(&self, codes: &[u32]) -> Vec<u32> {
        codes.iter().map(|c| *self.reassignment.get(c).unwrap_or(c)).collect()
    }

    pub fn to_csv(&self) -> String {
        pairs_csv(self.reassignment.iter().map(|(&s, &t)| (s, t)))
    }
}

fn check_smoothing_inputs(unseen: &[u32], seen: &[u32]) -> Result<()> {
    if seen.is_empty() {
        return Err(Error::Empty("smoothing needs at least one seen code".into()));
    }
    if let Some(u) = unseen.iter().find(|u| seen.contains(u)) {
        return Err(Error::InvalidParameter(format!("code {u} is listed as both seen and unseen")));
    }
    Ok(())
}

/// Maps every unseen code to a uniformly chosen seen code.
pub fn smooth_random(unseen: &[u32], seen: &[u32], seed: u64) -> Result<SmoothingMap> {
    check_smoothing_inputs(unseen, seen)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(SmoothingMap {
        reassignment: unseen
            .iter()
            .map(|&u| (u, *seen.choose(&mut rng).expect("non-empty")))
            .collect(),
    })
}

/// Number of coordinates on which two rows differ.
pub fn l0_distance(a: &[u32], b: &[u32]) -> usize {
    a.iter().zip(b).filter(|(x, y)| x != y).count()
}

/// Maps every unseen code to the seen code whose foreign features are
/// closest in l0 distance; ties are broken uniformly at random.
pub fn smooth_xr(unseen: &[u32], seen: &[u32], dim: &DimensionTable, seed: u64) -> Result<SmoothingMap> {
    check_smoothing_inputs(unseen, seen)?;
    let seen_rows = seen.iter().map(|&s| dim.feature_row(s)).collect::<Result<Vec<_>>>()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut reassignment = BTreeMap::new();
    for &u in unseen {
        let row = dim.feature_row(u)?;
        let dists: Vec<usize> = seen_rows.iter().map(|s| l0_distance(&row, s)).collect();
        let best = *dists.iter().min().expect("non-empty");
        let ties: Vec<u32> = seen.iter().zip(&dists).filter(|(_, &d)| d == best).map(|(&s, _)| s).collect();
        reassignment.insert(u, *ties.choose(&mut rng).expect("non-empty"));
    }
    Ok(SmoothingMap { reassignment })
}

/// Applies `map` to feature `feature` of `data`.
pub fn smooth_feature(data: &Dataset, feature: usize, map: &SmoothingMap) -> Result<Dataset> {
    let col = data
        .columns()
        .get(feature)
        .ok_or_else(|| Error::InvalidParameter(format!("no feature {feature}")))?;
    data.with_column(
        feature,
        Column::new(col.name.clone(), Arc::clone(&col.domain), map.apply(&col.codes))?,
    )
}

/// Codes in `0..domain_size` that occur (first) or do not occur (second)
/// in `codes`.
pub fn seen_and_unseen(codes: &[u32], domain_size: usize) -> (Vec<u32>, Vec<u32>) {
    let mut present = vec![false; domain_size];
    codes.iter().for_each(|&c| present[c as usize] = true);
    (0..domain_size as u32).partition(|&c| present[c as usize])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SmoothingMethod {
    Random,
    XrBased,
}

impl SmoothingMethod {
    pub fn name(self) -> &'static str {
        match self {
            SmoothingMethod::Random => "random",
            SmoothingMethod::XrBased => "xr_l0",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SmoothingEval {
    pub method: SmoothingMethod,
    /// Fraction of FK values withheld from training.
    pub unseen_fraction: f64,
    pub unseen_codes: usize,
    pub test_error: f64,
}

/// Draws `n` fact rows from `world` whose FK avoids `excluded`.
fn sample_avoiding(world: &World, n: usize, excluded: &[bool], seed: u64) -> Result<StarSchema> {
    let mut attempt = 0u64;
    let mut draw = (n as f64 * 1.5) as usize + 16;
    loop {
        let s = world.sample(draw, mix(seed, attempt))?;
        let keep: Vec<usize> = s.star.fact().fks()[0]
            .codes
            .iter()
            .enumerate()
            .filter(|(_, &c)| !excluded[c as usize])
            .map(|(r, _)| r)
            .take(n)
            .collect();
        if keep.len() == n {
            return Ok(s.star.select_rows(&keep));
        }
        attempt += 1;
        draw *= 2;
        if attempt > 8 {
            return Err(Error::TooSmall("cannot draw enough rows with seen FK values".into()));
        }
    }
}

/// Withholds a `unseen_fraction` share of FK values from training and
/// validation, tunes on the FK-only view, then predicts a test set drawn
/// from the full distribution after smoothing its unseen FK values.
pub fn evaluate_smoothing(
    world: &World,
    unseen_fraction: f64,
    grid: &HyperGrid,
    seed: u64,
) -> Result<Vec<SmoothingEval>> {
    if !(0.0..1.0).contains(&unseen_fraction) {
        return Err(Error::InvalidParameter(format!(
            "unseen fraction must lie in [0, 1), got {unseen_fraction}"
        )));
    }
    let cfg = world.config();
    let n_unseen = (unseen_fraction * cfg.n_r as f64).round() as usize;
    let mut codes: Vec<u32> = (0..cfg.n_r as u32).collect();
    codes.shuffle(&mut ChaCha8Rng::seed_from_u64(mix(seed, 0)));
    let mut excluded = vec![false; cfg.n_r];
    codes[..n_unseen].iter().for_each(|&c| excluded[c as usize] = true);

    let train = sample_avoiding(world, cfg.n_s, &excluded, mix(seed, 1))?;
    let val = sample_avoiding(world, cfg.holdout_size(), &excluded, mix(seed, 2))?;
    let test = world.sample(cfg.holdout_size(), mix(seed, 3))?.star;
    let view = FeatureView::NoJoin;
    let tr = apply_feature_view(&train, &view)?;
    let va = apply_feature_view(&val, &view)?;
    let te = apply_feature_view(&test, &view)?;
    let fk = tr
        .roles()
        .iter()
        .position(|r| matches!(r, FeatureRole::ForeignKey { .. }))
        .ok_or_else(|| Error::FeatureView("view has no foreign key".into()))?;
    let model = grid_search(&tr, &va, grid)?.model;
    let (seen, unseen) = seen_and_unseen(&tr.columns()[fk].codes, cfg.n_r);
    [SmoothingMethod::Random, SmoothingMethod::XrBased]
        .into_iter()
        .map(|method| {
            let map = match method {
                SmoothingMethod::Random => smooth_random(&unseen, &seen, mix(seed, 4))?,
                SmoothingMethod::XrBased => smooth_xr(&unseen, &seen, world.dimension(), mix(seed, 4))?,
            };
            let smoothed = smooth_feature(&te, fk, &map)?;
            let pred = model.predict_dataset(&smoothed)?;
            Ok(SmoothingEval {
                method,
                unseen_fraction,
                unseen_codes: unseen.len(),
                test_error: 1.0 - accuracy(&pred, smoothed.labels()),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::relational::fixtures::domain;

    #[test]
    fn entropy_fixtures() {
        let t = conditional_entropy(&[0, 0, 1, 1], &[0, 0, 1, 1], 2).unwrap();
        assert_eq!(t.total, 0.0);
        let t = conditional_entropy(&[0, 1, 0, 1], &[0, 0, 1, 1], 3).unwrap();
        assert!((t.total - 1.0).abs() < 1e-12);
        assert_eq!(t.per_value[2], 1.0);
        assert!(!t.is_seen(2));
        // z1: (3, 1), z2: (1, 3)
        let t = conditional_entropy(&[0, 0, 0, 1, 0, 1, 1, 1], &[0, 0, 0, 0, 1, 1, 1, 1], 2).unwrap();
        assert!((t.total - 0.8113).abs() < 1e-4);
        assert!(conditional_entropy(&[], &[], 2).is_err());
    }

    #[test]
    fn random_compression() {
        let f = compress_random(5, 5, 1).unwrap();
        assert!(f.image_size() <= 5);
        let f = compress_random(7, 1, 1).unwrap();
        assert!(f.mapping().iter().all(|&b| b == 0));
        assert!(compress_random(3, 4, 1).is_err());
        assert_eq!(compress_random(30, 4, 9), compress_random(30, 4, 9));
    }

    #[test]
    fn random_compression_loads() {
        let (m, l) = (10_000, 10);
        let f = compress_random(m, l, 3).unwrap();
        let mut loads = vec![0usize; l];
        f.mapping().iter().for_each(|&b| loads[b as usize] += 1);
        let sd = (m as f64 * 0.1 * 0.9).sqrt();
        assert!(loads.iter().all(|&c| (c as f64 - 1000.0).abs() <= 3.0 * sd), "{loads:?}");
    }

    /// Labels and codes whose per-value entropies are exactly `h`.
    fn with_entropies(counts: &[[usize; 2]]) -> (Vec<u8>, Vec<u32>) {
        let mut y = Vec::new();
        let mut z = Vec::new();
        for (code, c) in counts.iter().enumerate() {
            for (label, &k) in c.iter().enumerate() {
                y.extend(std::iter::repeat_n(label as u8, k));
                z.extend(std::iter::repeat_n(code as u32, k));
            }
        }
        (y, z)
    }

    #[test]
    fn sort_based_cuts_at_largest_gap() {
        // entropies 0, ~0.47, ~0.97, 1 in code order 2, 0, 3, 1
        let (y, z) = with_entropies(&[[1, 9], [5, 5], [4, 0], [4, 6]]);
        let f = compress_sort_based(&y, &z, 4, 2).unwrap();
        assert_eq!(f.mapping(), &[0, 1, 0, 1]);
        let f = compress_sort_based(&y, &z, 4, 4).unwrap();
        assert_eq!(f.image_size(), 4);
        let f = compress_sort_based(&y, &z, 4, 1).unwrap();
        assert!(f.mapping().iter().all(|&b| b == 0));
    }

    #[test]
    fn sort_based_places_unseen_last_and_fills_budget() {
        // all seen entropies 0, code 3 unseen
        let (y, z) = with_entropies(&[[2, 0], [0, 2], [3, 0], [0, 0]]);
        let f = compress_sort_based(&y, &z, 4, 3).unwrap();
        assert_eq!(f.image_size(), 3);
        assert_eq!(f.mapping()[3], 2);
        let g = compress_sort_based_with(&y, &z, 4, 3, CutTies::Random { seed: 5 }).unwrap();
        assert_eq!(g.image_size(), 3);
        assert_eq!(g, compress_sort_based_with(&y, &z, 4, 3, CutTies::Random { seed: 5 }).unwrap());
    }

    #[test]
    fn csv_output() {
        let f = CompressionMap::new(2, vec![1, 0, 1]).unwrap();
        assert_eq!(f.to_csv(), "source_code,target_code\n0,1\n1,0\n2,1\n");
        assert!(CompressionMap::new(2, vec![2, 0]).is_err());
    }

    fn dim() -> DimensionTable {
        let bin = domain("bin", 2);
        let rows = [[0, 0, 0], [0, 0, 1], [1, 1, 1], [0, 0, 0], [1, 1, 0]];
        let cols = (0..3)
            .map(|i| Column::new(format!("x{i}"), Arc::clone(&bin), rows.iter().map(|r| r[i]).collect()).unwrap())
            .collect();
        DimensionTable::new("R", domain("rid", 5), cols).unwrap()
    }

    #[test]
    fn random_smoothing() {
        let m = smooth_random(&[3, 4], &[1], 0).unwrap();
        assert_eq!(m.apply(&[3, 4, 1]), vec![1, 1, 1]);
        assert!(smooth_random(&[], &[1, 2], 0).unwrap().is_empty());
        assert!(smooth_random(&[1], &[], 0).is_err());
        assert_eq!(smooth_random(&[0, 5, 6], &[1, 2, 3], 7), smooth_random(&[0, 5, 6], &[1, 2, 3], 7));
    }

    #[test]
    fn xr_smoothing() {
        let d = dim();
        // code 3 shares its row with code 0 only
        let m = smooth_xr(&[3], &[0, 2], &d, 1).unwrap();
        assert_eq!(m.reassignment()[&3], 0);
        // code 1 = [0,0,1]: code 0 is 1 away, code 4 is 3 away
        let m = smooth_xr(&[1], &[0, 4], &d, 1).unwrap();
        assert_eq!(m.reassignment()[&1], 0);
        // codes 0 and 3 are both 1 away from code 1
        let picks: std::collections::BTreeSet<u32> =
            (0..32).map(|s| smooth_xr(&[1], &[0, 3], &d, s).unwrap().reassignment()[&1]).collect();
        assert_eq!(picks, [0, 3].into());
        assert_eq!(smooth_xr(&[1], &[0, 3], &d, 3), smooth_xr(&[1], &[0, 3], &d, 3));
        assert!(smooth_xr(&[7], &[0], &d, 0).is_err());
    }

    #[test]
    fn seen_partition() {
        assert_eq!(seen_and_unseen(&[0, 2, 2], 4), (vec![0, 2], vec![1, 3]));
    }
}
