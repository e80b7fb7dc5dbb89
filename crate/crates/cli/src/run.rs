//! Execution of each mode and ordered writing of its output files.

use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{anyhow, bail, Context, Result};
use joinsafe_core::advisor::{dimension_stats, recommend};
use joinsafe_core::classifiers::{accuracy, grid_search, HyperGrid};
use joinsafe_core::fk_tools::{
    compress_random, compress_sort_based, evaluate_compression, seen_and_unseen, smooth_random, smooth_xr,
    CompressionMethod,
};
use joinsafe_core::relational::{apply_feature_view, split_indices, Dataset, FeatureView, StarSchema};
use joinsafe_core::simulation::{mix, run_point, summarize_point, MonteCarlo, REPORT_HEADER};
use serde::Serialize;

use crate::config::{parse_families, parse_family, parse_views, ExperimentConfig, Mode};
use crate::ingest::load_star_schema;
use crate::plot::emit_plot_data;

pub const TIMINGS_FILE: &str = "timings.csv";
pub const MANIFEST_FILE: &str = "run_manifest.toml";

/// Files a mode produced, written only after the whole mode succeeded.
#[derive(Debug, Default)]
struct Outputs {
    files: Vec<(String, String)>,
    timings: Vec<(String, String, f64)>,
    /// Human-readable summary for standard output.
    summary: String,
}

impl Outputs {
    fn add(&mut self, name: &str, content: String) {
        self.files.push((name.to_string(), content));
    }
}

/// Paths written by a successful run, in write order.
#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub written: Vec<PathBuf>,
    pub summary: String,
}

fn csv_string<I, R>(header: &[&str], rows: I) -> Result<String>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator,
    R::Item: AsRef<[u8]>,
{
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    Ok(String::from_utf8(w.into_inner().map_err(|e| anyhow!("{e}"))?)?)
}

#[derive(Serialize)]
struct RunManifest<'a> {
    mode: &'a str,
    version: &'a str,
    seed: u64,
    config: &'a ExperimentConfig,
    derived_seeds: Vec<DerivedSeed>,
}

#[derive(Serialize)]
struct DerivedSeed {
    purpose: String,
    /// Decimal text, since TOML integers stop at `i64::MAX`.
    seed: String,
}

/// Runs `mode` and writes its reports, a run manifest and wall-clock
/// timings into `cfg.out`. Nothing is left behind on failure.
pub fn run_experiment(cfg: &ExperimentConfig, mode: Mode) -> Result<RunResult> {
    cfg.validate(mode)?;
    let mut out = match cfg.jobs {
        Some(j) => rayon::ThreadPoolBuilder::new()
            .num_threads(j)
            .build()?
            .install(|| run_mode(cfg, mode)),
        None => run_mode(cfg, mode),
    }
    .with_context(|| format!("{} failed", mode.name()))?;

    let derived_seeds = derived_seeds(cfg, mode)?;
    let manifest = RunManifest {
        mode: mode.name(),
        version: env!("CARGO_PKG_VERSION"),
        seed: cfg.seed,
        config: cfg,
        derived_seeds,
    };
    out.add(MANIFEST_FILE, toml::to_string(&manifest)?);
    let timings = csv_string(
        &["stage", "approach", "seconds"],
        out.timings.iter().map(|(s, a, t)| [s.clone(), a.clone(), format!("{t:.6}")]),
    )?;
    out.add(TIMINGS_FILE, timings);
    write_all(&cfg.out, &out.files).map(|written| RunResult {
        written,
        summary: out.summary,
    })
}

fn write_all(dir: &Path, files: &[(String, String)]) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    let mut written = Vec::new();
    for (name, content) in files {
        let path = dir.join(name);
        if let Err(e) = std::fs::write(&path, content) {
            for p in &written {
                let _ = std::fs::remove_file(p);
            }
            return Err(e).with_context(|| format!("cannot write {}", path.display()));
        }
        written.push(path);
    }
    Ok(written)
}

fn derived_seeds(cfg: &ExperimentConfig, mode: Mode) -> Result<Vec<DerivedSeed>> {
    Ok(match mode {
        Mode::Simulate => cfg
            .sweep_values()?
            .into_iter()
            .map(|v| DerivedSeed {
                purpose: format!("{} = {v}", cfg.sweep_axis().map(|a| a.name()).unwrap_or("value")),
                seed: mix(cfg.seed, v.to_bits()).to_string(),
            })
            .collect(),
        _ => vec![DerivedSeed {
            purpose: "train/validation/test split".into(),
            seed: cfg.seed.to_string(),
        }],
    })
}

fn run_mode(cfg: &ExperimentConfig, mode: Mode) -> Result<Outputs> {
    match mode {
        Mode::Simulate => simulate(cfg),
        Mode::Experiment => experiment(cfg),
        Mode::Advise => advise(cfg),
        Mode::Compress => compress(cfg),
        Mode::Smooth => smooth(cfg),
    }
}

fn simulate(cfg: &ExperimentConfig) -> Result<Outputs> {
    let s = cfg.simulation()?;
    let base = cfg.sim_config()?;
    let mut out = Outputs::default();
    let mut rows = Vec::new();
    for family in parse_families(&s.families)? {
        let mc = MonteCarlo {
            scenario: cfg.scenario()?,
            base,
            axis: cfg.sweep_axis()?,
            values: cfg.sweep_values()?,
            approaches: parse_views(&s.approaches)?,
            grid: HyperGrid::standard(family),
            runs: cfg.runs,
            master_seed: cfg.seed,
        };
        for &v in &mc.values {
            let t = Instant::now();
            let point = run_point(&mc, v)?;
            out.timings.push((
                format!("{} {} = {v}", family.name(), mc.axis.name()),
                "all".into(),
                t.elapsed().as_secs_f64(),
            ));
            rows.extend(summarize_point(&mc, &point)?);
        }
    }
    let report = joinsafe_core::simulation::SweepReport { rows };
    let header: Vec<&str> = REPORT_HEADER.split(',').collect();
    let sweep = csv_string(
        &header,
        report.rows.iter().map(|r| {
            [
                r.scenario.clone(),
                r.param.clone(),
                r.value.to_string(),
                r.approach.clone(),
                r.model.clone(),
                r.avg_test_error.to_string(),
                r.bias.to_string(),
                r.net_variance.to_string(),
                r.runs.to_string(),
            ]
        }),
    )?;
    out.summary = sweep.clone();
    out.add("sweep.csv", sweep);
    out.add("plot_data.csv", emit_plot_data(&report.rows, &["model", "value", "approach"])?);
    Ok(out)
}

fn load(cfg: &ExperimentConfig) -> Result<StarSchema> {
    let path = cfg.manifest.as_ref().ok_or_else(|| anyhow!("no manifest configured"))?;
    load_star_schema(path)
}

/// Train, validation and test datasets of one view.
fn split_view(star: &StarSchema, view: &FeatureView, seed: u64) -> Result<(Dataset, Dataset, Dataset)> {
    let s = split_indices(star.fact().n_rows(), seed)?;
    let data = apply_feature_view(star, view)?;
    Ok((data.select_rows(&s.train), data.select_rows(&s.validation), data.select_rows(&s.test)))
}

fn experiment(cfg: &ExperimentConfig) -> Result<Outputs> {
    let sec = cfg.experiment_section();
    let star = load(cfg)?;
    let views = parse_views(&sec.approaches)?;
    let mut out = Outputs::default();
    let mut rows = Vec::new();
    let splits = views
        .iter()
        .map(|v| split_view(&star, v, cfg.seed).with_context(|| format!("view {}", v.name())))
        .collect::<Result<Vec<_>>>()?;
    for family in parse_families(&sec.families)? {
        let grid = HyperGrid::standard(family);
        for (view, (tr, va, te)) in views.iter().zip(&splits) {
            let t = Instant::now();
            let res = grid_search(tr, va, &grid).with_context(|| format!("{} on {}", family.name(), view.name()))?;
            let pred = res.model.predict_dataset(te)?;
            out.timings.push((family.name(), view.name(), t.elapsed().as_secs_f64()));
            let correct = pred.iter().zip(te.labels()).filter(|(a, b)| a == b).count();
            rows.push([
                family.name(),
                view.name(),
                res.best.to_string(),
                res.validation_accuracy[res.best_index].map_or(String::new(), |a| a.to_string()),
                accuracy(&pred, te.labels()).to_string(),
                correct.to_string(),
                (te.n_rows() - correct).to_string(),
                te.n_rows().to_string(),
            ]);
        }
    }
    let table = csv_string(
        &[
            "family",
            "approach",
            "best_params",
            "validation_accuracy",
            "test_accuracy",
            "correct",
            "incorrect",
            "test_size",
        ],
        rows,
    )?;
    out.summary = table.clone();
    out.add("accuracy.csv", table);
    Ok(out)
}

fn advise(cfg: &ExperimentConfig) -> Result<Outputs> {
    let sec = cfg.advise_section();
    let star = load(cfg)?;
    let family = parse_family(&sec.family)?;
    let train_rows = match sec.train_rows {
        Some(n) => n,
        None => split_indices(star.fact().n_rows(), cfg.seed)?.train.len(),
    };
    let stats = dimension_stats(&star);
    let rec = recommend(train_rows, &stats, family, &sec.thresholds.unwrap_or_default())?;
    let mut out = Outputs::default();
    let mut summary = format!("{:<20} {:>10} {:>10} {:>12}  verdict\n", "dimension", "n_r", "ratio", "threshold");
    for (d, s) in rec.dims.iter().zip(&stats) {
        summary.push_str(&format!(
            "{:<20} {:>10} {:>10.2} {:>12}  {}\n",
            d.dimension,
            s.n_r,
            d.tuple_ratio,
            d.threshold,
            d.verdict.as_str()
        ));
    }
    out.summary = summary;
    out.add("advice.csv", rec.to_csv(&stats));
    Ok(out)
}

/// Index of FK column `name` in the fact table and in the NoJoin view.
fn locate_fk(star: &StarSchema, name: &str, view: &Dataset) -> Result<(usize, usize)> {
    let fact_idx = star
        .fact()
        .fks()
        .iter()
        .position(|c| c.name == name)
        .ok_or_else(|| anyhow!("`{name}` is not a foreign key of the fact table"))?;
    let b = star.bindings().iter().find(|b| b.fk == fact_idx).expect("validated");
    if b.open_domain {
        bail!("`{name}` has an open domain and is never used as a feature");
    }
    let view_idx = view
        .feature_index(name)
        .ok_or_else(|| anyhow!("`{name}` is missing from the view"))?;
    Ok((fact_idx, view_idx))
}

fn compress(cfg: &ExperimentConfig) -> Result<Outputs> {
    let sec = cfg.compress.as_ref().expect("validated");
    let star = load(cfg)?;
    let (tr, va, te) = split_view(&star, &FeatureView::NoJoin, cfg.seed)?;
    let (_, f) = locate_fk(&star, &sec.fk, &tr)?;
    let m = tr.columns()[f].domain.len();
    let (map, method) = match sec.method.as_str() {
        "sort" => (compress_sort_based(tr.labels(), &tr.columns()[f].codes, m, sec.budget)?, CompressionMethod::SortBased),
        _ => (compress_random(m, sec.budget, cfg.seed)?, CompressionMethod::Random),
    };
    let mut out = Outputs {
        summary: format!("compressed `{}` from {m} to {} values\n", sec.fk, map.image_size()),
        ..Outputs::default()
    };
    out.add("compression_map.csv", map.to_csv());
    if let Some(fam) = &sec.evaluate_family {
        let grid = HyperGrid::standard(parse_family(fam)?);
        let t = Instant::now();
        let ev = evaluate_compression(&tr, &va, &te, f, sec.budget, method, &grid, cfg.seed)?;
        out.timings.push((format!("evaluate {fam}"), "NoJoin".into(), t.elapsed().as_secs_f64()));
        out.add(
            "compression_eval.csv",
            csv_string(
                &["budget", "method", "test_accuracy", "train_entropy"],
                [[
                    ev.budget.to_string(),
                    sec.method.clone(),
                    ev.test_accuracy.to_string(),
                    ev.train_entropy.to_string(),
                ]],
            )?,
        );
    }
    Ok(out)
}

fn smooth(cfg: &ExperimentConfig) -> Result<Outputs> {
    let sec = cfg.smooth.as_ref().expect("validated");
    let star = load(cfg)?;
    let (tr, _, _) = split_view(&star, &FeatureView::NoJoin, cfg.seed)?;
    let (fact_idx, f) = locate_fk(&star, &sec.fk, &tr)?;
    let (seen, unseen) = seen_and_unseen(&tr.columns()[f].codes, tr.columns()[f].domain.len());
    let map = match sec.method.as_str() {
        "random" => smooth_random(&unseen, &seen, cfg.seed)?,
        _ => smooth_xr(&unseen, &seen, star.dim_of_fk(fact_idx), cfg.seed)?,
    };
    let mut out = Outputs {
        summary: format!(
            "reassigned {} of {} `{}` values unseen in training\n",
            map.len(),
            seen.len() + unseen.len(),
            sec.fk
        ),
        ..Outputs::default()
    };
    out.add("smoothing_map.csv", map.to_csv());
    Ok(out)
}
