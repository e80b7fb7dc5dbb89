//! CART-style classification trees over categorical features.
//!
//! Every internal node splits one feature's domain into two branches.
//! Domains observed with at most [`EXHAUSTIVE_LIMIT`] values are searched
//! exhaustively; larger ones use the class-proportion ordering, which is
//! exact for Gini and entropy with a binary target.
//!
//! Pre-pruning is controlled by [`TreeParams`]: a node is not split when it
//! holds fewer than `minsplit` rows, or when its best split improves the fit
//! by less than `cp` relative to the root impurity. Because the best split of
//! a node never depends on the parameters, a tree grown with
//! `minsplit = 1, cp = 0` can be truncated to any other setting with
//! [`DecisionTree::with_params`].

use std::cmp::Ordering;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::relational::Dataset;

/// Observed-domain size up to which all binary partitions are enumerated.
pub const EXHAUSTIVE_LIMIT: usize = 12;

/// Gains within this distance are treated as ties.
pub const GAIN_TIE_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SplitCriterion {
    Gini,
    InfoGain,
    GainRatio,
}

impl SplitCriterion {
    pub const ALL: [SplitCriterion; 3] = [SplitCriterion::Gini, SplitCriterion::InfoGain, SplitCriterion::GainRatio];

    pub fn name(self) -> &'static str {
        match self {
            SplitCriterion::Gini => "gini",
            SplitCriterion::InfoGain => "infogain",
            SplitCriterion::GainRatio => "gainratio",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreeParams {
    pub minsplit: usize,
    pub cp: f64,
}

impl TreeParams {
    pub fn new(minsplit: usize, cp: f64) -> Result<Self> {
        if minsplit < 1 {
            return Err(Error::InvalidParameter("minsplit must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&cp) {
            return Err(Error::InvalidParameter(format!("cp must lie in [0, 1], got {cp}")));
        }
        Ok(Self { minsplit, cp })
    }

    /// Grows until no split improves impurity.
    pub fn unpruned() -> Self {
        Self { minsplit: 1, cp: 0.0 }
    }
}

fn entropy2(counts: [usize; 2]) -> f64 {
    let n = (counts[0] + counts[1]) as f64;
    counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.log2()
        })
        .sum()
}

fn gini2(counts: [usize; 2]) -> f64 {
    let n = (counts[0] + counts[1]) as f64;
    let p0 = counts[0] as f64 / n;
    let p1 = counts[1] as f64 / n;
    1.0 - p0 * p0 - p1 * p1
}

/// Node impurity: Gini index, or base-2 entropy for the two entropy criteria.
pub fn impurity(counts: [usize; 2], criterion: SplitCriterion) -> Result<f64> {
    if counts[0] + counts[1] == 0 {
        return Err(Error::EmptyNode);
    }
    Ok(match criterion {
        SplitCriterion::Gini => gini2(counts),
        SplitCriterion::InfoGain | SplitCriterion::GainRatio => entropy2(counts),
    })
}

/// Split score of a parent divided into `left` and `right`.
pub fn split_score(left: [usize; 2], right: [usize; 2], criterion: SplitCriterion) -> f64 {
    let nl = (left[0] + left[1]) as f64;
    let nr = (right[0] + right[1]) as f64;
    if nl == 0.0 || nr == 0.0 {
        return 0.0;
    }
    let n = nl + nr;
    let parent = [left[0] + right[0], left[1] + right[1]];
    let imp = |c: [usize; 2]| match criterion {
        SplitCriterion::Gini => gini2(c),
        _ => entropy2(c),
    };
    let gain = imp(parent) - (nl / n) * imp(left) - (nr / n) * imp(right);
    match criterion {
        SplitCriterion::GainRatio => {
            let split_info = entropy2([left[0] + left[1], right[0] + right[1]]);
            gain / split_info
        }
        _ => gain,
    }
}

/// A binary partition of the values a feature takes at a node.
#[derive(Debug, Clone, PartialEq)]
pub struct Split {
    pub feature: usize,
    /// Observed values sent to the left branch; always contains the
    /// smallest observed value.
    pub left: Vec<u32>,
    /// Observed values sent to the right branch.
    pub right: Vec<u32>,
    pub gain: f64,
    pub left_counts: [usize; 2],
    pub right_counts: [usize; 2],
}

impl Split {
    /// Side (0 left, 1 right) of each observed value, in ascending value order.
    pub fn signature(&self) -> Vec<u8> {
        let mut all: Vec<(u32, u8)> = self
            .left
            .iter()
            .map(|&v| (v, 0))
            .chain(self.right.iter().map(|&v| (v, 1)))
            .collect();
        all.sort_unstable();
        all.into_iter().map(|(_, s)| s).collect()
    }
}

/// Returns true when `cand` should replace `best` under the tie rule:
/// larger gain, then lower feature index, then smaller signature.
pub(crate) fn better_split(cand: &Split, best: &Split) -> bool {
    if cand.gain > best.gain + GAIN_TIE_EPS {
        return true;
    }
    if cand.gain < best.gain - GAIN_TIE_EPS {
        return false;
    }
    match cand.feature.cmp(&best.feature) {
        Ordering::Less => true,
        Ordering::Greater => false,
        Ordering::Equal => cand.signature() < best.signature(),
    }
}

fn class_counts(labels: &[u8], rows: &[usize]) -> [usize; 2] {
    let mut c = [0usize; 2];
    for &r in rows {
        c[labels[r] as usize] += 1;
    }
    c
}

/// Builds a canonical split (smallest observed value on the left).
fn make_split(feature: usize, observed: &[(u32, [usize; 2])], right_mask: &[bool], criterion: SplitCriterion) -> Split {
    let mut left = Vec::new();
    let mut right = Vec::new();
    let mut lc = [0usize; 2];
    let mut rc = [0usize; 2];
    let flip = right_mask[0];
    for (&(v, c), &r) in observed.iter().zip(right_mask) {
        if r != flip {
            right.push(v);
            rc[0] += c[0];
            rc[1] += c[1];
        } else {
            left.push(v);
            lc[0] += c[0];
            lc[1] += c[1];
        }
    }
    Split {
        feature,
        gain: split_score(lc, rc, criterion),
        left,
        right,
        left_counts: lc,
        right_counts: rc,
    }
}

fn best_split_for_feature(
    data: &Dataset,
    rows: &[usize],
    feature: usize,
    criterion: SplitCriterion,
    scratch: &mut Vec<[usize; 2]>,
) -> Option<Split> {
    let col = &data.columns()[feature];
    let labels = data.labels();
    scratch.clear();
    scratch.resize(col.domain.len(), [0, 0]);
    for &r in rows {
        scratch[col.codes[r] as usize][labels[r] as usize] += 1;
    }
    // (value, counts) in ascending value order
    let observed: Vec<(u32, [usize; 2])> = scratch
        .iter()
        .enumerate()
        .filter(|(_, c)| c[0] + c[1] > 0)
        .map(|(v, &c)| (v as u32, c))
        .collect();
    let k = observed.len();
    if k < 2 {
        return None;
    }
    let mut best: Option<Split> = None;
    let mut consider = |s: Split| {
        if best.as_ref().is_none_or(|b| better_split(&s, b)) {
            best = Some(s);
        }
    };
    if k <= EXHAUSTIVE_LIMIT {
        // value 0 of `observed` stays left; mask bit i sends observed[i + 1] right
        let mut mask_sides = vec![false; k];
        for mask in 1u32..(1u32 << (k - 1)) {
            for (i, side) in mask_sides.iter_mut().enumerate().skip(1) {
                *side = mask & (1 << (i - 1)) != 0;
            }
            consider(make_split(feature, &observed, &mask_sides, criterion));
        }
    } else {
        let mut order: Vec<usize> = (0..k).collect();
        let frac = |c: [usize; 2]| c[1] as f64 / (c[0] + c[1]) as f64;
        order.sort_by(|&a, &b| {
            frac(observed[a].1)
                .partial_cmp(&frac(observed[b].1))
                .unwrap()
                .then(observed[a].0.cmp(&observed[b].0))
        });
        let mut sides = vec![true; k];
        for &cut in &order[..k - 1] {
            sides[cut] = false;
            consider(make_split(feature, &observed, &sides, criterion));
        }
    }
    best
}

/// Best partition including zero-gain ones; `None` only when every feature
/// is constant on `rows`.
fn search_split(data: &Dataset, rows: &[usize], criterion: SplitCriterion) -> Option<Split> {
    let mut scratch = Vec::new();
    let mut best: Option<Split> = None;
    for f in 0..data.n_features() {
        if let Some(mut s) = best_split_for_feature(data, rows, f, criterion, &mut scratch) {
            s.gain = s.gain.max(0.0);
            if best.as_ref().is_none_or(|b| better_split(&s, b)) {
                best = Some(s);
            }
        }
    }
    best
}

/// The best binary value-partition over all features at the given rows, or
/// `None` when no split improves impurity.
pub fn best_split(data: &Dataset, rows: &[usize], criterion: SplitCriterion) -> Option<Split> {
    search_split(data, rows, criterion).filter(|s| s.gain > GAIN_TIE_EPS)
}

#[derive(Debug, Clone, PartialEq)]
struct NodeSplit {
    feature: usize,
    /// Branch per domain value; `true` routes left.
    goes_left: Vec<bool>,
    /// Split score scaled by node weight and divided by root impurity.
    relative_gain: f64,
    children: [usize; 2],
}

#[derive(Debug, Clone, PartialEq)]
struct Node {
    counts: [usize; 2],
    split: Option<NodeSplit>,
}

impl Node {
    fn n(&self) -> usize {
        self.counts[0] + self.counts[1]
    }

    fn majority(&self) -> u8 {
        u8::from(self.counts[1] > self.counts[0])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecisionTree {
    nodes: Arc<Vec<Node>>,
    criterion: SplitCriterion,
    params: TreeParams,
    domain_sizes: Vec<usize>,
}

impl DecisionTree {
    pub fn criterion(&self) -> SplitCriterion {
        self.criterion
    }

    pub fn params(&self) -> TreeParams {
        self.params
    }

    /// The same tree pre-pruned at different parameters. Only meaningful for
    /// tightening: nodes the source tree never split stay leaves.
    pub fn with_params(&self, params: TreeParams) -> DecisionTree {
        DecisionTree {
            nodes: Arc::clone(&self.nodes),
            criterion: self.criterion,
            params,
            domain_sizes: self.domain_sizes.clone(),
        }
    }

    fn active_split<'a>(&self, node: &'a Node) -> Option<&'a NodeSplit> {
        node.split
            .as_ref()
            .filter(|s| node.n() >= self.params.minsplit && s.relative_gain >= self.params.cp)
    }

    /// Number of nodes reachable under the current parameters.
    pub fn node_count(&self) -> usize {
        let mut count = 0;
        let mut stack = vec![0usize];
        while let Some(i) = stack.pop() {
            count += 1;
            if let Some(s) = self.active_split(&self.nodes[i]) {
                stack.extend(s.children);
            }
        }
        count
    }

    pub fn depth(&self) -> usize {
        let mut depth = 0;
        let mut stack = vec![(0usize, 0usize)];
        while let Some((i, d)) = stack.pop() {
            depth = depth.max(d);
            if let Some(s) = self.active_split(&self.nodes[i]) {
                stack.extend(s.children.iter().map(|&c| (c, d + 1)));
            }
        }
        depth
    }

    /// Feature split at the root, if any.
    pub fn root_feature(&self) -> Option<usize> {
        self.active_split(&self.nodes[0]).map(|s| s.feature)
    }

    /// Features used by any reachable split.
    pub fn features_used(&self) -> Vec<usize> {
        let mut used = Vec::new();
        let mut stack = vec![0usize];
        while let Some(i) = stack.pop() {
            if let Some(s) = self.active_split(&self.nodes[i]) {
                used.push(s.feature);
                stack.extend(s.children);
            }
        }
        used.sort_unstable();
        used.dedup();
        used
    }

    pub fn check_example(&self, example: &[u32]) -> Result<()> {
        if example.len() != self.domain_sizes.len() {
            return Err(Error::DimensionMismatch {
                expected: self.domain_sizes.len(),
                actual: example.len(),
            });
        }
        if let Some(f) = (0..example.len()).find(|&f| example[f] as usize >= self.domain_sizes[f]) {
            return Err(Error::IncompatibleExample(format!(
                "feature {f} has code {} outside its domain of size {}",
                example[f], self.domain_sizes[f]
            )));
        }
        Ok(())
    }

    /// Routes an example whose codes are known to be in range.
    pub(crate) fn predict_unchecked(&self, example: &[u32]) -> u8 {
        let mut node = &self.nodes[0];
        while let Some(s) = self.active_split(node) {
            let next = if s.goes_left[example[s.feature] as usize] {
                s.children[0]
            } else {
                s.children[1]
            };
            node = &self.nodes[next];
        }
        node.majority()
    }

    pub fn predict(&self, example: &[u32]) -> Result<u8> {
        self.check_example(example)?;
        Ok(self.predict_unchecked(example))
    }
}

/// Grows a tree by recursive binary partitioning.
pub fn train_tree(train: &Dataset, params: TreeParams, criterion: SplitCriterion) -> Result<DecisionTree> {
    if train.n_rows() == 0 {
        return Err(Error::Empty("cannot train a tree on zero rows".into()));
    }
    let labels = train.labels();
    let all: Vec<usize> = (0..train.n_rows()).collect();
    let root_counts = class_counts(labels, &all);
    let root_impurity = impurity(root_counts, criterion)?;
    let n_root = train.n_rows() as f64;

    let mut nodes = vec![Node {
        counts: root_counts,
        split: None,
    }];
    let mut stack = vec![(0usize, all)];
    while let Some((id, rows)) = stack.pop() {
        let counts = nodes[id].counts;
        if rows.len() < params.minsplit || counts[0] == 0 || counts[1] == 0 {
            continue;
        }
        // with cp = 0 a zero-gain split is still taken (XOR needs one)
        let Some(split) = search_split(train, &rows, criterion) else {
            continue;
        };
        let relative_gain = (rows.len() as f64 / n_root) * split.gain / root_impurity;
        if relative_gain < params.cp {
            continue;
        }
        let col = &train.columns()[split.feature];
        let mut goes_left = vec![false; col.domain.len()];
        for &v in &split.left {
            goes_left[v as usize] = true;
        }
        let n_left = split.left_counts[0] + split.left_counts[1];
        let n_right = split.right_counts[0] + split.right_counts[1];
        // values unseen at this node follow the larger branch
        let unseen_left = n_left >= n_right;
        let observed: Vec<bool> = {
            let mut o = vec![false; col.domain.len()];
            for &v in split.left.iter().chain(&split.right) {
                o[v as usize] = true;
            }
            o
        };
        for (v, g) in goes_left.iter_mut().enumerate() {
            if !observed[v] {
                *g = unseen_left;
            }
        }
        let (left_rows, right_rows): (Vec<usize>, Vec<usize>) =
            rows.iter().partition(|&&r| goes_left[col.codes[r] as usize]);
        let l = nodes.len();
        nodes.push(Node {
            counts: split.left_counts,
            split: None,
        });
        nodes.push(Node {
            counts: split.right_counts,
            split: None,
        });
        nodes[id].split = Some(NodeSplit {
            feature: split.feature,
            goes_left,
            relative_gain,
            children: [l, l + 1],
        });
        stack.push((l + 1, right_rows));
        stack.push((l, left_rows));
    }
    Ok(DecisionTree {
        nodes: Arc::new(nodes),
        criterion,
        params,
        domain_sizes: train.domain_sizes(),
    })
}
