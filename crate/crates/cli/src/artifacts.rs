//! Result payloads, the on-disk cache, and the JSON/CSV artifact writer.
//!
//! Fresh and cached runs both write their artifacts from an [`Output`], so
//! the files produced by the two paths are byte-identical.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::config::RunConfig;

/// Tag mixed into every cache key; bump it whenever numerical output of an
/// unchanged configuration may change.
pub const CODE_VERSION: &str = concat!("trapbec-", env!("CARGO_PKG_VERSION"), "+r1");

/// One CSV table with a fixed column schema.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push<I: IntoIterator<Item = String>>(&mut self, row: I) {
        self.rows.push(row.into_iter().collect());
    }
}

/// Shortest round-trip decimal form of a float.
pub fn num(x: f64) -> String {
    format!("{x}")
}

/// Everything a command produces.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Output {
    pub units: String,
    pub result: Value,
    pub table: Option<Table>,
    /// Process exit status implied by the result (nonzero for failed
    /// property suites or partially failed sweeps).
    pub exit_code: i32,
}

#[derive(Serialize, Deserialize)]
struct CacheEntry {
    key: String,
    code_version: String,
    config: RunConfig,
    output: Output,
}

#[derive(Serialize)]
struct KeyMaterial<'a> {
    command: &'static str,
    code_version: &'static str,
    config: &'a RunConfig,
    table_sha256: Option<String>,
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Stable hash of the command, the physics part of the configuration, the
/// contents of a tabulated potential, and the code version.
pub fn cache_key(config: &RunConfig) -> Result<String> {
    let table_sha256 = match config.table_path() {
        Some(path) => {
            let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
            Some(hex(&Sha256::digest(bytes)))
        }
        None => None,
    };
    let view = config.physics_view();
    let material = KeyMaterial {
        command: config.command().name(),
        code_version: CODE_VERSION,
        config: &view,
        table_sha256,
    };
    let canonical = serde_json::to_string(&material)?;
    Ok(hex(&Sha256::digest(canonical.as_bytes())))
}

pub fn cache_path(config: &RunConfig, key: &str) -> PathBuf {
    config.cache_dir().join(format!("{key}.json"))
}

/// Cached output for `key`, if present and consistent with `config`.
pub fn load_cached(config: &RunConfig, key: &str) -> Option<Output> {
    let text = fs::read_to_string(cache_path(config, key)).ok()?;
    let entry: CacheEntry = serde_json::from_str(&text).ok()?;
    (entry.key == key
        && entry.code_version == CODE_VERSION
        && entry.config == config.physics_view())
    .then_some(entry.output)
}

/// Stores `output` under `key`; the file is written atomically.
pub fn store_cached(config: &RunConfig, key: &str, output: &Output) -> Result<()> {
    let dir = config.cache_dir();
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    let entry = CacheEntry {
        key: key.to_string(),
        code_version: CODE_VERSION.to_string(),
        config: config.physics_view(),
        output: output.clone(),
    };
    let path = cache_path(config, key);
    let tmp = path.with_extension("json.tmp");
    fs::write(&tmp, serde_json::to_vec(&entry)?)?;
    fs::rename(&tmp, &path)?;
    Ok(())
}

#[derive(Serialize)]
struct ResultDocument<'a> {
    command: &'static str,
    code_version: &'static str,
    cache_key: &'a str,
    units: &'a str,
    config: RunConfig,
    result: &'a Value,
}

/// Writes `<output_dir>/<stem>.json` and, when a table is present,
/// `<output_dir>/<stem>.csv`. Returns the written paths.
pub fn write_artifacts(config: &RunConfig, key: &str, output: &Output) -> Result<Vec<PathBuf>> {
    let dir = &config.output_dir;
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let stem = config.stem();
    let mut written = Vec::new();

    let doc = ResultDocument {
        command: config.command().name(),
        code_version: CODE_VERSION,
        cache_key: key,
        units: &output.units,
        config: config.physics_view(),
        result: &output.result,
    };
    let json_path = dir.join(format!("{stem}.json"));
    let mut text = serde_json::to_string_pretty(&doc)?;
    text.push('\n');
    fs::write(&json_path, text).with_context(|| format!("writing {}", json_path.display()))?;
    written.push(json_path);

    if let Some(table) = &output.table {
        let csv_path = dir.join(format!("{stem}.csv"));
        write_csv(&csv_path, &output.units, table)?;
        written.push(csv_path);
    }
    Ok(written)
}

fn write_csv(path: &Path, units: &str, table: &Table) -> Result<()> {
    let mut file = fs::File::create(path).with_context(|| format!("writing {}", path.display()))?;
    writeln!(file, "# units: {units}")?;
    let mut w = csv::Writer::from_writer(file);
    w.write_record(&table.header)?;
    for row in &table.rows {
        w.write_record(row)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes a diagnostics document for a failed run.
pub fn write_diagnostics(config: &RunConfig, error: &str, exit_code: i32) -> Result<PathBuf> {
    let dir = &config.output_dir;
    fs::create_dir_all(dir)?;
    let path = dir.join(format!("{}.error.json", config.stem()));
    let doc = serde_json::json!({
        "command": config.command().name(),
        "code_version": CODE_VERSION,
        "exit_code": exit_code,
        "error": error,
        "config": config.physics_view(),
    });
    fs::write(&path, serde_json::to_string_pretty(&doc)? + "\n")?;
    Ok(path)
}
