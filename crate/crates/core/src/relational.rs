//! Categorical star schemas and the feature views built over them.
//!
//! A [`StarSchema`] holds one fact table `S(SID, Y, X_S, FK_1..FK_q)` and `q`
//! dimension tables `R_j(RID_j, X_R_j)`. Every column is stored as dense
//! integer codes into a [`CategoricalDomain`]; one-hot vectors are only built
//! at the classifier boundary by [`one_hot_encode`].

use std::collections::{BTreeSet, HashMap};
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Reserved label for values outside the known domain.
pub const OTHERS: &str = "Others";

/// Ordered set of distinct value labels for one categorical column.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CategoricalDomain {
    name: String,
    values: Vec<String>,
    index: HashMap<String, u32>,
    has_others: bool,
}

impl CategoricalDomain {
    /// Builds a domain from labels in the given order. A trailing
    /// [`OTHERS`] label marks the domain as having the reserved slot.
    pub fn new(name: impl Into<String>, values: Vec<String>) -> Result<Self> {
        let name = name.into();
        if values.is_empty() {
            return Err(Error::InvalidDomain {
                name,
                reason: "domain must hold at least one value".into(),
            });
        }
        let mut index = HashMap::with_capacity(values.len());
        for (code, v) in values.iter().enumerate() {
            if index.insert(v.clone(), code as u32).is_some() {
                return Err(Error::InvalidDomain {
                    name,
                    reason: format!("duplicate value `{v}`"),
                });
            }
        }
        let has_others = match index.get(OTHERS) {
            Some(&code) if code as usize == values.len() - 1 => true,
            Some(_) => {
                return Err(Error::InvalidDomain {
                    name,
                    reason: format!("`{OTHERS}` must be the last value"),
                })
            }
            None => false,
        };
        Ok(Self {
            name,
            values,
            index,
            has_others,
        })
    }

    /// Domain whose labels are the decimal codes `0..size`.
    pub fn indexed(name: impl Into<String>, size: usize) -> Result<Self> {
        Self::new(name, (0..size).map(|i| i.to_string()).collect())
    }

    /// Returns the same domain with [`OTHERS`] appended (no-op if present).
    pub fn with_others(mut self) -> Self {
        if !self.has_others {
            self.index.insert(OTHERS.to_string(), self.values.len() as u32);
            self.values.push(OTHERS.to_string());
            self.has_others = true;
        }
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn values(&self) -> &[String] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn has_others(&self) -> bool {
        self.has_others
    }

    /// Number of values excluding the reserved slot.
    pub fn known_len(&self) -> usize {
        self.values.len() - usize::from(self.has_others)
    }

    pub fn others_code(&self) -> Option<u32> {
        self.has_others.then(|| self.values.len() as u32 - 1)
    }

    pub fn code_of(&self, label: &str) -> Option<u32> {
        self.index.get(label).copied()
    }

    pub fn label(&self, code: u32) -> Option<&str> {
        self.values.get(code as usize).map(String::as_str)
    }
}

/// A named column of codes into a shared domain.
#[derive(Debug, Clone, PartialEq)]
pub struct Column {
    pub name: String,
    pub domain: Arc<CategoricalDomain>,
    pub codes: Vec<u32>,
}

impl Column {
    pub fn new(
        name: impl Into<String>,
        domain: Arc<CategoricalDomain>,
        codes: Vec<u32>,
    ) -> Result<Self> {
        let name = name.into();
        let size = domain.len();
        if let Some((row, &code)) = codes.iter().enumerate().find(|(_, &c)| c as usize >= size) {
            return Err(Error::Encoding {
                feature: name,
                row,
                code,
                size,
            });
        }
        Ok(Self { name, domain, codes })
    }

    pub fn len(&self) -> usize {
        self.codes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.codes.is_empty()
    }
}

/// The fact table `S(SID, Y, X_S, FK_1..FK_q)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FactTable {
    row_ids: Vec<u64>,
    target: Vec<u8>,
    home: Vec<Column>,
    fks: Vec<Column>,
}

impl FactTable {
    pub fn new(row_ids: Vec<u64>, target: Vec<u8>, home: Vec<Column>, fks: Vec<Column>) -> Result<Self> {
        let n = target.len();
        if row_ids.len() != n {
            return Err(Error::Schema(format!(
                "fact table has {} row ids but {} targets",
                row_ids.len(),
                n
            )));
        }
        for col in home.iter().chain(&fks) {
            if col.len() != n {
                return Err(Error::Schema(format!(
                    "column `{}` has {} rows, expected {}",
                    col.name,
                    col.len(),
                    n
                )));
            }
        }
        if let Some(row) = target.iter().position(|&y| y > 1) {
            return Err(Error::Schema(format!("target at row {row} is not binary")));
        }
        Ok(Self {
            row_ids,
            target,
            home,
            fks,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.target.len()
    }

    pub fn row_ids(&self) -> &[u64] {
        &self.row_ids
    }

    pub fn target(&self) -> &[u8] {
        &self.target
    }

    pub fn home(&self) -> &[Column] {
        &self.home
    }

    pub fn fks(&self) -> &[Column] {
        &self.fks
    }

    /// Keeps the given rows, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> FactTable {
        let pick = |c: &Column| Column {
            name: c.name.clone(),
            domain: Arc::clone(&c.domain),
            codes: rows.iter().map(|&r| c.codes[r]).collect(),
        };
        FactTable {
            row_ids: rows.iter().map(|&r| self.row_ids[r]).collect(),
            target: rows.iter().map(|&r| self.target[r]).collect(),
            home: self.home.iter().map(pick).collect(),
            fks: self.fks.iter().map(pick).collect(),
        }
    }
}

/// A dimension table `R(RID, X_R)`. Feature columns may be absent when only
/// the key cardinality is known, which is all `NoJoin` needs.
#[derive(Debug, Clone, PartialEq)]
pub struct DimensionTable {
    name: String,
    rid_domain: Arc<CategoricalDomain>,
    features: Option<Vec<Column>>,
}

impl DimensionTable {
    pub fn new(name: impl Into<String>, rid_domain: Arc<CategoricalDomain>, features: Vec<Column>) -> Result<Self> {
        let name = name.into();
        for col in &features {
            if col.len() != rid_domain.len() {
                return Err(Error::Schema(format!(
                    "dimension `{name}` column `{}` has {} rows, expected {}",
                    col.name,
                    col.len(),
                    rid_domain.len()
                )));
            }
        }
        Ok(Self {
            name,
            rid_domain,
            features: Some(features),
        })
    }

    /// A dimension known only by its key domain.
    pub fn cardinality_only(name: impl Into<String>, rid_domain: Arc<CategoricalDomain>) -> Self {
        Self {
            name: name.into(),
            rid_domain,
            features: None,
        }
    }

    /// Appends the reserved [`OTHERS`] key, whose foreign features are
    /// [`OTHERS`] too, so that every code of the widened key domain joins.
    pub fn with_others_row(self) -> Self {
        if self.rid_domain.has_others() {
            return self;
        }
        let rid_domain = Arc::new((*self.rid_domain).clone().with_others());
        let features = self.features.map(|cols| {
            cols.into_iter()
                .map(|c| {
                    let domain = Arc::new((*c.domain).clone().with_others());
                    let mut codes = c.codes;
                    codes.push(domain.others_code().expect("just added"));
                    Column {
                        name: c.name,
                        domain,
                        codes,
                    }
                })
                .collect()
        });
        Self {
            name: self.name,
            rid_domain,
            features,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn rid_domain(&self) -> &Arc<CategoricalDomain> {
        &self.rid_domain
    }

    /// `n_R`: the number of real keys, excluding the reserved slot.
    pub fn n_rows(&self) -> usize {
        self.rid_domain.known_len()
    }

    pub fn features(&self) -> Result<&[Column]> {
        self.features
            .as_deref()
            .ok_or_else(|| Error::MissingDimensionFeatures(self.name.clone()))
    }

    pub fn has_features(&self) -> bool {
        self.features.is_some()
    }

    /// The `X_R` tuple of one key.
    pub fn feature_row(&self, rid: u32) -> Result<Vec<u32>> {
        if rid as usize >= self.rid_domain.len() {
            return Err(Error::InvalidParameter(format!(
                "key code {rid} is outside `{}` of {} rows",
                self.name,
                self.rid_domain.len()
            )));
        }
        Ok(self.features()?.iter().map(|c| c.codes[rid as usize]).collect())
    }
}

/// Binding of fact FK column `fk` to dimension `dim`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FkBinding {
    pub fk: usize,
    pub dim: usize,
    /// Keys of an open domain never recur, so the FK is never a feature.
    pub open_domain: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StarSchema {
    fact: FactTable,
    dims: Vec<DimensionTable>,
    bindings: Vec<FkBinding>,
}

impl StarSchema {
    /// Validates bindings and referential integrity.
    pub fn new(fact: FactTable, dims: Vec<DimensionTable>, bindings: Vec<FkBinding>) -> Result<Self> {
        let q = fact.fks().len();
        if dims.len() != q || bindings.len() != q {
            return Err(Error::Schema(format!(
                "{} foreign keys, {} dimensions and {} bindings must agree",
                q,
                dims.len(),
                bindings.len()
            )));
        }
        let mut fk_seen = vec![false; q];
        let mut dim_seen = vec![false; q];
        for b in &bindings {
            if b.fk >= q || b.dim >= q {
                return Err(Error::Schema(format!("binding {b:?} is out of range")));
            }
            if std::mem::replace(&mut fk_seen[b.fk], true) || std::mem::replace(&mut dim_seen[b.dim], true) {
                return Err(Error::Schema(format!(
                    "binding {b:?} reuses a foreign key or dimension"
                )));
            }
        }
        let star = Self { fact, dims, bindings };
        star.check_referential_integrity()?;
        Ok(star)
    }

    /// Star with one FK per dimension, bound in order.
    pub fn in_order(fact: FactTable, dims: Vec<DimensionTable>) -> Result<Self> {
        let bindings = (0..dims.len())
            .map(|j| FkBinding {
                fk: j,
                dim: j,
                open_domain: false,
            })
            .collect();
        Self::new(fact, dims, bindings)
    }

    fn check_referential_integrity(&self) -> Result<()> {
        for b in &self.bindings {
            let col = &self.fact.fks()[b.fk];
            let dim = &self.dims[b.dim];
            let keys = dim.rid_domain();
            if !Arc::ptr_eq(&col.domain, keys) && col.domain.values() != keys.values() {
                if let Some((row, &code)) = col
                    .codes
                    .iter()
                    .enumerate()
                    .find(|(_, &c)| col.domain.label(c).and_then(|l| keys.code_of(l)).is_none())
                {
                    return Err(Error::ReferentialIntegrity {
                        column: col.name.clone(),
                        row,
                        value: col.domain.label(code).unwrap_or("?").to_string(),
                    });
                }
                return Err(Error::Schema(format!(
                    "column `{}` is not coded against the key domain of `{}`",
                    col.name,
                    dim.name()
                )));
            }
        }
        Ok(())
    }

    pub fn fact(&self) -> &FactTable {
        &self.fact
    }

    pub fn dims(&self) -> &[DimensionTable] {
        &self.dims
    }

    pub fn bindings(&self) -> &[FkBinding] {
        &self.bindings
    }

    pub fn q(&self) -> usize {
        self.dims.len()
    }

    /// The dimension referenced by FK column `fk`.
    pub fn dim_of_fk(&self, fk: usize) -> &DimensionTable {
        let b = self.bindings.iter().find(|b| b.fk == fk).expect("validated binding");
        &self.dims[b.dim]
    }

    /// Same dimensions, fact rows restricted to `rows`.
    pub fn select_rows(&self, rows: &[usize]) -> StarSchema {
        StarSchema {
            fact: self.fact.select_rows(rows),
            dims: self.dims.clone(),
            bindings: self.bindings.clone(),
        }
    }
}

/// `n_S / n_R`.
pub fn tuple_ratio(fact_rows: usize, dim_rows: usize) -> Result<f64> {
    if dim_rows == 0 {
        return Err(Error::InvalidDimension(
            "tuple ratio needs at least one dimension row".into(),
        ));
    }
    Ok(fact_rows as f64 / dim_rows as f64)
}

/// Where a dataset column came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FeatureRole {
    Home,
    ForeignKey { dim: usize },
    Foreign { dim: usize },
}

/// Labeled examples over categorical feature columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    columns: Vec<Column>,
    roles: Vec<FeatureRole>,
    labels: Vec<u8>,
}

impl Dataset {
    pub fn new(columns: Vec<Column>, roles: Vec<FeatureRole>, labels: Vec<u8>) -> Result<Self> {
        if columns.len() != roles.len() {
            return Err(Error::Schema("one role per column is required".into()));
        }
        if let Some(c) = columns.iter().find(|c| c.len() != labels.len()) {
            return Err(Error::Schema(format!(
                "column `{}` has {} rows, expected {}",
                c.name,
                c.len(),
                labels.len()
            )));
        }
        if let Some(row) = labels.iter().position(|&y| y > 1) {
            return Err(Error::Schema(format!("label at row {row} is not binary")));
        }
        Ok(Self {
            columns,
            roles,
            labels,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.labels.len()
    }

    pub fn n_features(&self) -> usize {
        self.columns.len()
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn roles(&self) -> &[FeatureRole] {
        &self.roles
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn column_names(&self) -> Vec<&str> {
        self.columns.iter().map(|c| c.name.as_str()).collect()
    }

    pub fn domain_sizes(&self) -> Vec<usize> {
        self.columns.iter().map(|c| c.domain.len()).collect()
    }

    #[inline]
    pub fn value(&self, row: usize, feature: usize) -> u32 {
        self.columns[feature].codes[row]
    }

    pub fn row(&self, row: usize) -> Vec<u32> {
        self.columns.iter().map(|c| c.codes[row]).collect()
    }

    /// Row-major copy of all codes.
    pub fn rows(&self) -> Vec<Vec<u32>> {
        (0..self.n_rows()).map(|r| self.row(r)).collect()
    }

    pub fn select_rows(&self, rows: &[usize]) -> Dataset {
        Dataset {
            columns: self
                .columns
                .iter()
                .map(|c| Column {
                    name: c.name.clone(),
                    domain: Arc::clone(&c.domain),
                    codes: rows.iter().map(|&r| c.codes[r]).collect(),
                })
                .collect(),
            roles: self.roles.clone(),
            labels: rows.iter().map(|&r| self.labels[r]).collect(),
        }
    }

    /// Replaces one column (same length) and keeps its role.
    pub fn with_column(&self, feature: usize, column: Column) -> Result<Dataset> {
        if column.len() != self.n_rows() {
            return Err(Error::Schema(format!(
                "replacement column `{}` has {} rows, expected {}",
                column.name,
                column.len(),
                self.n_rows()
            )));
        }
        let mut out = self.clone();
        out.columns[feature] = column;
        Ok(out)
    }

    pub fn feature_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }
}

/// The projected equi-join `T(SID, Y, X_S, FK_1..FK_q, X_R_1..X_R_q)`.
#[derive(Debug, Clone, PartialEq)]
pub struct JoinedTable {
    pub row_ids: Vec<u64>,
    pub data: Dataset,
}

/// Joins every dimension into the fact table by FK lookup. The join is not
/// selective, so the output has exactly `n_S` rows.
pub fn materialize_join(star: &StarSchema) -> Result<JoinedTable> {
    let data = build_view(star, &FeatureView::JoinAll, true)?;
    Ok(JoinedTable {
        row_ids: star.fact().row_ids().to_vec(),
        data,
    })
}

/// Which feature groups enter the learner.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum FeatureView {
    /// `X_S ∪ {FK_j} ∪ {X_R_j}`.
    JoinAll,
    /// `X_S ∪ {FK_j}`.
    NoJoin,
    /// `X_S ∪ {X_R_j}`.
    NoFK,
    /// `X_S ∪ {FK_j}` plus `X_R_j` for every dimension not dropped.
    Custom { dropped_dims: BTreeSet<usize> },
}

impl FeatureView {
    pub fn name(&self) -> String {
        match self {
            FeatureView::JoinAll => "JoinAll".into(),
            FeatureView::NoJoin => "NoJoin".into(),
            FeatureView::NoFK => "NoFK".into(),
            FeatureView::Custom { dropped_dims } => {
                let ids: Vec<String> = dropped_dims.iter().map(|d| format!("R{}", d + 1)).collect();
                format!("No{}", ids.join(""))
            }
        }
    }

    fn keeps_fk(&self) -> bool {
        !matches!(self, FeatureView::NoFK)
    }

    fn keeps_dim(&self, dim: usize) -> bool {
        match self {
            FeatureView::JoinAll | FeatureView::NoFK => true,
            FeatureView::NoJoin => false,
            FeatureView::Custom { dropped_dims } => !dropped_dims.contains(&dim),
        }
    }
}

/// Projects the star onto the columns a view selects. Dimension feature
/// columns are read only for dimensions the view keeps.
pub fn apply_feature_view(star: &StarSchema, view: &FeatureView) -> Result<Dataset> {
    build_view(star, view, false)
}

fn build_view(star: &StarSchema, view: &FeatureView, keep_open_fks: bool) -> Result<Dataset> {
    if let FeatureView::Custom { dropped_dims } = view {
        if let Some(&d) = dropped_dims.iter().find(|&&d| d >= star.q()) {
            return Err(Error::FeatureView(format!(
                "cannot drop dimension {d}: the star has {} dimensions",
                star.q()
            )));
        }
    }
    let fact = star.fact();
    let mut columns = Vec::new();
    let mut roles = Vec::new();
    for c in fact.home() {
        columns.push(c.clone());
        roles.push(FeatureRole::Home);
    }
    let mut bindings: Vec<FkBinding> = star.bindings().to_vec();
    bindings.sort_by_key(|b| b.fk);
    if view.keeps_fk() {
        for b in &bindings {
            if b.open_domain && !keep_open_fks {
                continue;
            }
            columns.push(fact.fks()[b.fk].clone());
            roles.push(FeatureRole::ForeignKey { dim: b.dim });
        }
    }
    for b in &bindings {
        if !view.keeps_dim(b.dim) {
            continue;
        }
        let dim = &star.dims()[b.dim];
        let fk = &fact.fks()[b.fk];
        for feat in dim.features()? {
            let codes = fk.codes.iter().map(|&rid| feat.codes[rid as usize]).collect();
            columns.push(Column {
                name: feat.name.clone(),
                domain: Arc::clone(&feat.domain),
                codes,
            });
            roles.push(FeatureRole::Foreign { dim: b.dim });
        }
    }
    Dataset::new(columns, roles, fact.target().to_vec())
}

/// Maps labels outside `known` to its [`OTHERS`] code.
pub fn recode_to_others<S: AsRef<str>>(values: &[S], known: &CategoricalDomain) -> Result<Vec<u32>> {
    let others = known.others_code().ok_or_else(|| Error::InvalidDomain {
        name: known.name().to_string(),
        reason: format!("recoding needs an `{OTHERS}` slot"),
    })?;
    Ok(values
        .iter()
        .map(|v| known.code_of(v.as_ref()).unwrap_or(others))
        .collect())
}

/// Column layout of a one-hot encoding: feature `f` occupies
/// `offsets[f]..offsets[f] + sizes[f]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OneHotLayout {
    offsets: Vec<usize>,
    sizes: Vec<usize>,
}

impl OneHotLayout {
    pub fn new(sizes: Vec<usize>) -> Self {
        let mut offsets = Vec::with_capacity(sizes.len());
        let mut acc = 0;
        for &s in &sizes {
            offsets.push(acc);
            acc += s;
        }
        Self { offsets, sizes }
    }

    pub fn for_dataset(data: &Dataset) -> Self {
        Self::new(data.domain_sizes())
    }

    pub fn width(&self) -> usize {
        self.offsets.last().map_or(0, |o| o + self.sizes.last().unwrap())
    }

    pub fn n_features(&self) -> usize {
        self.sizes.len()
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn column(&self, feature: usize, code: u32) -> usize {
        self.offsets[feature] + code as usize
    }

    /// Checks a code row against this layout.
    pub fn check_row(&self, codes: &[u32]) -> Result<()> {
        if codes.len() != self.sizes.len() {
            return Err(Error::DimensionMismatch {
                expected: self.sizes.len(),
                actual: codes.len(),
            });
        }
        for (f, (&c, &s)) in codes.iter().zip(&self.sizes).enumerate() {
            if c as usize >= s {
                return Err(Error::Encoding {
                    feature: format!("#{f}"),
                    row: 0,
                    code: c,
                    size: s,
                });
            }
        }
        Ok(())
    }

    pub fn encode_row(&self, codes: &[u32]) -> Result<Vec<f64>> {
        self.check_row(codes)?;
        let mut out = vec![0.0; self.width()];
        for (f, &c) in codes.iter().enumerate() {
            out[self.column(f, c)] = 1.0;
        }
        Ok(out)
    }
}

/// Dense one-hot matrix with one indicator column per (feature, value).
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedMatrix {
    n_rows: usize,
    layout: OneHotLayout,
    data: Vec<f64>,
    labels: Vec<u8>,
    column_index: Vec<(usize, u32)>,
}

impl EncodedMatrix {
    /// Builds a matrix from raw rows (not necessarily one-hot).
    pub fn from_rows(rows: Vec<Vec<f64>>, labels: Vec<u8>) -> Result<Self> {
        if rows.len() != labels.len() {
            return Err(Error::DimensionMismatch {
                expected: labels.len(),
                actual: rows.len(),
            });
        }
        let width = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != width) {
            return Err(Error::DimensionMismatch {
                expected: width,
                actual: bad.len(),
            });
        }
        let layout = OneHotLayout::new(vec![1; width]);
        Ok(Self {
            n_rows: rows.len(),
            column_index: (0..width).map(|c| (c, 0)).collect(),
            layout,
            data: rows.into_iter().flatten().collect(),
            labels,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.layout.width()
    }

    pub fn row(&self, r: usize) -> &[f64] {
        let w = self.n_cols();
        &self.data[r * w..(r + 1) * w]
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn layout(&self) -> &OneHotLayout {
        &self.layout
    }

    /// `(feature, value code)` behind each column.
    pub fn column_index(&self) -> &[(usize, u32)] {
        &self.column_index
    }

    pub fn column_of(&self, feature: usize, code: u32) -> Option<usize> {
        (feature < self.layout.n_features() && (code as usize) < self.layout.sizes[feature])
            .then(|| self.layout.column(feature, code))
    }
}

/// One-hot encodes every column in schema order, values in domain order.
pub fn one_hot_encode(data: &Dataset) -> Result<EncodedMatrix> {
    let layout = OneHotLayout::for_dataset(data);
    let width = layout.width();
    let n = data.n_rows();
    let mut out = vec![0.0; n * width];
    for (f, col) in data.columns().iter().enumerate() {
        let size = col.domain.len();
        for (r, &c) in col.codes.iter().enumerate() {
            if c as usize >= size {
                return Err(Error::Encoding {
                    feature: col.name.clone(),
                    row: r,
                    code: c,
                    size,
                });
            }
            out[r * width + layout.column(f, c)] = 1.0;
        }
    }
    let column_index = data
        .columns()
        .iter()
        .enumerate()
        .flat_map(|(f, c)| (0..c.domain.len() as u32).map(move |v| (f, v)))
        .collect();
    Ok(EncodedMatrix {
        n_rows: n,
        layout,
        data: out,
        labels: data.labels().to_vec(),
        column_index,
    })
}

/// Row indices of a 50/25/25 train/validation/test partition.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitIndices {
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
    pub test: Vec<usize>,
}

pub fn split_indices(n: usize, seed: u64) -> Result<SplitIndices> {
    if n < 4 {
        return Err(Error::TooSmall(format!(
            "a three-way split needs at least 4 rows, got {n}"
        )));
    }
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_train = n / 2;
    let n_val = n / 4;
    let test = perm.split_off(n_train + n_val);
    let validation = perm.split_off(n_train);
    Ok(SplitIndices {
        train: perm,
        validation,
        test,
    })
}

pub fn split_three_way(data: &Dataset, seed: u64) -> Result<(Dataset, Dataset, Dataset)> {
    let s = split_indices(data.n_rows(), seed)?;
    Ok((
        data.select_rows(&s.train),
        data.select_rows(&s.validation),
        data.select_rows(&s.test),
    ))
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::*;
    use rand::Rng;

    pub fn domain(name: &str, size: usize) -> Arc<CategoricalDomain> {
        Arc::new(CategoricalDomain::indexed(name, size).unwrap())
    }

    /// Random star with `q` dimensions of `n_r` rows and binary features.
    pub fn random_star(seed: u64, n_s: usize, q: usize, n_r: usize, d_s: usize, d_r: usize) -> StarSchema {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let bin = domain("bin", 2);
        let home = (0..d_s)
            .map(|i| Column {
                name: format!("xs{i}"),
                domain: Arc::clone(&bin),
                codes: (0..n_s).map(|_| rng.random_range(0..2)).collect(),
            })
            .collect();
        let mut dims = Vec::new();
        let mut fks = Vec::new();
        for j in 0..q {
            let rid = domain(&format!("rid{j}"), n_r);
            let feats = (0..d_r)
                .map(|i| Column {
                    name: format!("xr{j}_{i}"),
                    domain: Arc::clone(&bin),
                    codes: (0..n_r).map(|_| rng.random_range(0..2)).collect(),
                })
                .collect();
            dims.push(DimensionTable::new(format!("R{j}"), Arc::clone(&rid), feats).unwrap());
            fks.push(Column {
                name: format!("fk{j}"),
                domain: rid,
                codes: (0..n_s).map(|_| rng.random_range(0..n_r as u32)).collect(),
            });
        }
        let target = (0..n_s).map(|_| rng.random_range(0..2)).collect();
        let fact = FactTable::new((0..n_s as u64).collect(), target, home, fks).unwrap();
        StarSchema::in_order(fact, dims).unwrap()
    }
}
