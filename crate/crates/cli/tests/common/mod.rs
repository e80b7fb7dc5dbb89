//! Toy star schemas written to temporary directories.

#![allow(dead_code)]

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

pub const FACT_ROWS: usize = 240;
pub const STORES: usize = 12;

/// Writes `fact.csv`, `stores.csv` and `manifest.toml`; returns the manifest.
/// The label follows the store's region, flipped on every 11th row.
pub fn write_toy(dir: &Path, dangling_at: Option<usize>) -> PathBuf {
    let mut stores = String::from("store_id,region\n");
    for s in 0..STORES {
        writeln!(stores, "s{s},{}", if s % 2 == 0 { "north" } else { "south" }).unwrap();
    }
    let mut fact = String::from("y,store,weekday\n");
    for i in 0..FACT_ROWS {
        let s = (i * 7) % STORES;
        let y = u8::from(s.is_multiple_of(2)) ^ u8::from(i.is_multiple_of(11));
        let store = if dangling_at == Some(i) { "s999".to_string() } else { format!("s{s}") };
        writeln!(fact, "{y},{store},d{}", i % 3).unwrap();
    }
    std::fs::write(dir.join("stores.csv"), stores).unwrap();
    std::fs::write(dir.join("fact.csv"), fact).unwrap();
    let manifest = dir.join("manifest.toml");
    std::fs::write(
        &manifest,
        r#"
[fact]
path = "fact.csv"
target = "y"
fks = [{ column = "store", dimension = "stores" }]

[[dimensions]]
name = "stores"
path = "stores.csv"
key = "store_id"
"#,
    )
    .unwrap();
    manifest
}

/// Writes `config.toml` next to the toy data with `body` appended.
pub fn write_config(dir: &Path, body: &str) -> PathBuf {
    let path = dir.join("config.toml");
    std::fs::write(&path, format!("manifest = \"manifest.toml\"\nout = {:?}\n{body}", dir.join("out"))).unwrap();
    path
}
