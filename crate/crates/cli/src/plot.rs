//! Long-format aggregates of sweep reports for plotting.

use std::cmp::Ordering;

use anyhow::{bail, Result};
use joinsafe_core::simulation::SweepRow;

pub const GROUP_KEYS: [&str; 5] = ["scenario", "param", "value", "approach", "model"];

fn key_of(row: &SweepRow, key: &str) -> KeyValue {
    match key {
        "scenario" => KeyValue::Text(row.scenario.clone()),
        "param" => KeyValue::Text(row.param.clone()),
        "value" => KeyValue::Number(row.value),
        "approach" => KeyValue::Text(row.approach.clone()),
        "model" => KeyValue::Text(row.model.clone()),
        _ => unreachable!("keys are validated"),
    }
}

#[derive(Debug, Clone, PartialEq)]
enum KeyValue {
    Text(String),
    Number(f64),
}

impl KeyValue {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (KeyValue::Number(a), KeyValue::Number(b)) => a.total_cmp(b),
            (KeyValue::Text(a), KeyValue::Text(b)) => a.cmp(b),
            _ => Ordering::Equal,
        }
    }

    fn render(&self) -> String {
        match self {
            KeyValue::Text(s) => s.clone(),
            KeyValue::Number(v) => v.to_string(),
        }
    }
}

/// One row per distinct combination of `group_by` keys with run-weighted
/// mean test error and net variance, sorted by the keys in order.
pub fn emit_plot_data(rows: &[SweepRow], group_by: &[&str]) -> Result<String> {
    if rows.is_empty() {
        bail!("cannot emit plot data from an empty report");
    }
    if let Some(k) = group_by.iter().find(|k| !GROUP_KEYS.contains(k)) {
        bail!("unknown group-by key `{k}`; expected one of {GROUP_KEYS:?}");
    }
    let mut groups: Vec<(Vec<KeyValue>, f64, f64, usize)> = Vec::new();
    for r in rows {
        let key: Vec<KeyValue> = group_by.iter().map(|k| key_of(r, k)).collect();
        let w = r.runs as f64;
        match groups.iter_mut().find(|g| g.0 == key) {
            Some(g) => {
                g.1 += r.avg_test_error * w;
                g.2 += r.net_variance * w;
                g.3 += r.runs;
            }
            None => groups.push((key, r.avg_test_error * w, r.net_variance * w, r.runs)),
        }
    }
    groups.sort_by(|a, b| {
        a.0.iter()
            .zip(&b.0)
            .map(|(x, y)| x.cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(Ordering::Equal)
    });
    let mut out = group_by.join(",");
    out.push_str(",mean_test_error,mean_net_variance,runs\n");
    for (key, err, var, runs) in groups {
        let n = runs as f64;
        let cells: Vec<String> = key.iter().map(KeyValue::render).collect();
        out.push_str(&format!("{},{},{},{}\n", cells.join(","), err / n, var / n, runs));
    }
    Ok(out)
}
