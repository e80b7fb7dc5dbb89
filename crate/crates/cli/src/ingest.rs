//! Star schemas from a manifest and comma-separated files.
//!
//! Every feature column is categorical. Domains are the sorted distinct
//! values seen in the data plus any values the manifest declares; FK domains
//! additionally get the reserved `Others` slot.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{anyhow, bail, Context, Result};
use joinsafe_core::relational::{CategoricalDomain, Column, DimensionTable, FactTable, FkBinding, StarSchema};
use joinsafe_core::Error;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub fact: FactSpec,
    #[serde(default)]
    pub dimensions: Vec<DimensionSpec>,
    /// Extra values per column name, merged into the inferred domains.
    #[serde(default)]
    pub domains: BTreeMap<String, Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FactSpec {
    pub path: PathBuf,
    pub target: String,
    /// Ordinal targets become 1 when `value >= threshold`, else 0.
    pub threshold: Option<f64>,
    /// Optional row-id column; row numbers are used otherwise.
    pub id: Option<String>,
    #[serde(default)]
    pub fks: Vec<FkSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FkSpec {
    pub column: String,
    pub dimension: String,
    #[serde(default)]
    pub open_domain: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DimensionSpec {
    pub name: String,
    pub path: PathBuf,
    pub key: String,
}

/// A CSV file as a header and string columns.
struct Table {
    header: Vec<String>,
    columns: Vec<Vec<String>>,
}

impl Table {
    fn read(path: &Path) -> Result<Self> {
        let mut rdr = csv::Reader::from_path(path).with_context(|| format!("cannot read {}", path.display()))?;
        let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
        let mut columns = vec![Vec::new(); header.len()];
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec.with_context(|| format!("{} record {}", path.display(), i + 1))?;
            for (c, v) in rec.iter().enumerate() {
                columns[c].push(v.to_string());
            }
        }
        Ok(Self { header, columns })
    }

    fn column(&self, name: &str, file: &Path) -> Result<&[String]> {
        self.header
            .iter()
            .position(|h| h == name)
            .map(|i| self.columns[i].as_slice())
            .ok_or_else(|| anyhow!("{} has no column `{name}`", file.display()))
    }
}

pub fn read_manifest(path: &Path) -> Result<Manifest> {
    let text = std::fs::read_to_string(path).with_context(|| format!("cannot read manifest {}", path.display()))?;
    toml::from_str(&text).with_context(|| format!("malformed manifest {}", path.display()))
}

fn domain_for(name: &str, values: &[String], extra: Option<&Vec<String>>) -> Result<Arc<CategoricalDomain>> {
    let set: BTreeSet<String> = values.iter().chain(extra.into_iter().flatten()).cloned().collect();
    Ok(Arc::new(CategoricalDomain::new(name, set.into_iter().collect())?))
}

fn coded(name: &str, domain: Arc<CategoricalDomain>, values: &[String]) -> Result<Column> {
    let codes = values
        .iter()
        .map(|v| domain.code_of(v).expect("domain built from these values"))
        .collect();
    Ok(Column::new(name, domain, codes)?)
}

fn binarize(values: &[String], threshold: Option<f64>, column: &str) -> Result<Vec<u8>> {
    values
        .iter()
        .enumerate()
        .map(|(row, v)| match threshold {
            Some(t) => {
                let x: f64 = v
                    .trim()
                    .parse()
                    .with_context(|| format!("target `{column}` row {row} is not numeric: `{v}`"))?;
                Ok(u8::from(x >= t))
            }
            None => match v.trim() {
                "0" => Ok(0),
                "1" => Ok(1),
                _ => bail!("target `{column}` row {row} is `{v}`: not binary and no threshold was given"),
            },
        })
        .collect()
}

/// Loads the star described by the manifest at `path`; data paths are
/// relative to the manifest's directory.
pub fn load_star_schema(path: &Path) -> Result<StarSchema> {
    let manifest = read_manifest(path)?;
    let base = path.parent().unwrap_or(Path::new("."));
    load_from_manifest(&manifest, base)
}

pub fn load_from_manifest(m: &Manifest, base: &Path) -> Result<StarSchema> {
    let mut dims = Vec::new();
    let mut dim_index = HashMap::new();
    for spec in &m.dimensions {
        let file = base.join(&spec.path);
        let t = Table::read(&file)?;
        let keys = t.column(&spec.key, &file)?;
        let mut seen = HashMap::new();
        for (row, k) in keys.iter().enumerate() {
            if let Some(first) = seen.insert(k.as_str(), row) {
                bail!(
                    "dimension `{}` repeats key `{k}` at rows {first} and {row}",
                    spec.name
                );
            }
        }
        let rid = Arc::new(CategoricalDomain::new(format!("{}.{}", spec.name, spec.key), keys.to_vec())?);
        let features = t
            .header
            .iter()
            .zip(&t.columns)
            .filter(|(h, _)| **h != spec.key)
            .map(|(h, vals)| coded(h, domain_for(h, vals, m.domains.get(h))?, vals))
            .collect::<Result<Vec<_>>>()?;
        let dim = DimensionTable::new(spec.name.clone(), rid, features)?.with_others_row();
        if dim_index.insert(spec.name.clone(), dims.len()).is_some() {
            bail!("dimension `{}` is declared twice", spec.name);
        }
        dims.push(dim);
    }

    let f = &m.fact;
    let file = base.join(&f.path);
    let t = Table::read(&file)?;
    let target = binarize(t.column(&f.target, &file)?, f.threshold, &f.target)?;
    let row_ids = match &f.id {
        Some(id) => t
            .column(id, &file)?
            .iter()
            .enumerate()
            .map(|(row, v)| v.trim().parse::<u64>().with_context(|| format!("row id at row {row} is `{v}`")))
            .collect::<Result<Vec<_>>>()?,
        None => (0..target.len() as u64).collect(),
    };
    let fk_names: BTreeSet<&str> = f.fks.iter().map(|k| k.column.as_str()).collect();
    let home = t
        .header
        .iter()
        .zip(&t.columns)
        .filter(|(h, _)| **h != f.target && Some(*h) != f.id.as_ref() && !fk_names.contains(h.as_str()))
        .map(|(h, vals)| coded(h, domain_for(h, vals, m.domains.get(h))?, vals))
        .collect::<Result<Vec<_>>>()?;

    let mut fks = Vec::new();
    let mut bindings = Vec::new();
    let mut used = BTreeSet::new();
    for (j, k) in f.fks.iter().enumerate() {
        let d = *dim_index
            .get(&k.dimension)
            .ok_or_else(|| anyhow!("FK `{}` references unknown dimension `{}`", k.column, k.dimension))?;
        if !used.insert(d) {
            bail!("dimension `{}` is referenced by more than one FK", k.dimension);
        }
        let rid = Arc::clone(dims[d].rid_domain());
        let values = t.column(&k.column, &file)?;
        let mut codes = Vec::with_capacity(values.len());
        for (row, v) in values.iter().enumerate() {
            // open-domain keys need not join; they are never used as features
            match rid.code_of(v) {
                Some(c) => codes.push(c),
                None if k.open_domain => codes.push(rid.others_code().expect("FK domains carry Others")),
                None => {
                    return Err(Error::ReferentialIntegrity {
                        column: k.column.clone(),
                        row,
                        value: v.clone(),
                    }
                    .into())
                }
            }
        }
        fks.push(Column::new(k.column.clone(), rid, codes)?);
        bindings.push(FkBinding {
            fk: j,
            dim: d,
            open_domain: k.open_domain,
        });
    }
    if used.len() != dims.len() {
        bail!("every dimension must be referenced by exactly one FK");
    }
    let fact = FactTable::new(row_ids, target, home, fks)?;
    Ok(StarSchema::new(fact, dims, bindings)?)
}
