use std::fs;
use std::path::{Path, PathBuf};

use ppde_core::{ExperimentConfig, Result};
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

/// A CSV table; `seed` and `config_hash` columns are appended on write.
#[derive(Debug, Clone, Default)]
pub struct Table {
    pub name: String,
    pub headers: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(name: &str, headers: &[&str]) -> Self {
        Self { name: name.into(), headers: headers.iter().map(|h| h.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.headers.len());
        self.rows.push(row);
    }
}

/// Shortest round-trip formatting, so reruns print identical bytes.
pub fn num(v: f64) -> String {
    format!("{v}")
}

/// What a subcommand hands back to the writer.
pub struct Outcome {
    pub report: Value,
    pub tables: Vec<Table>,
    /// Names of failed checks; any entry turns into a nonzero exit after
    /// the artifacts are written.
    pub failed: Vec<String>,
}

impl Outcome {
    pub fn ok(report: impl Serialize, tables: Vec<Table>) -> Self {
        Self { report: to_value(report), tables, failed: Vec::new() }
    }

    /// Keeps the names whose flag is false.
    pub fn checked(report: impl Serialize, tables: Vec<Table>, checks: &[(&str, bool)]) -> Self {
        let failed = checks.iter().filter(|c| !c.1).map(|c| c.0.to_string()).collect();
        Self { report: to_value(report), tables, failed }
    }
}

pub fn to_value(v: impl Serialize) -> Value {
    serde_json::to_value(v).expect("reports serialize")
}

/// Config with run-local knobs cleared, so the hash depends only on what
/// determines the numbers.
pub fn normalized(cfg: &ExperimentConfig) -> ExperimentConfig {
    ExperimentConfig { threads: None, out: String::new(), ..cfg.clone() }
}

pub fn config_hash(cfg: &ExperimentConfig) -> String {
    hex::encode(Sha256::digest(normalized(cfg).to_toml().as_bytes()))
}

/// Wall-clock fields differ between reruns.
fn strip_runtimes(v: &mut Value) {
    match v {
        Value::Object(m) => {
            m.remove("runtime_s");
            m.values_mut().for_each(strip_runtimes);
        }
        Value::Array(a) => a.iter_mut().for_each(strip_runtimes),
        _ => {}
    }
}

pub fn write_outcome(out: &Path, sub: &str, cfg: &ExperimentConfig, outcome: &Outcome) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(out)?;
    let hash = config_hash(cfg);
    let mut report = outcome.report.clone();
    strip_runtimes(&mut report);
    let doc = json!({
        "subcommand": sub,
        "seed": cfg.seed,
        "config_hash": hash,
        "config": to_value(normalized(cfg)),
        "failed_checks": outcome.failed,
        "report": report,
    });
    let mut written = Vec::new();
    let path = out.join(format!("{sub}.json"));
    fs::write(&path, serde_json::to_string_pretty(&doc).expect("json") + "\n")?;
    written.push(path);
    let seed = cfg.seed.to_string();
    for t in &outcome.tables {
        let path = out.join(format!("{}.csv", t.name));
        let mut w = csv::Writer::from_path(&path)?;
        w.write_record(t.headers.iter().map(String::as_str).chain(["seed", "config_hash"]))?;
        for r in &t.rows {
            w.write_record(r.iter().map(String::as_str).chain([seed.as_str(), hash.as_str()]))?;
        }
        w.flush()?;
        written.push(path);
    }
    Ok(written)
}

/// Machine-readable failure record, printed to stderr and saved when the
/// output directory is writable.
pub fn error_record(sub: &str, kind: &str, message: &str) -> Value {
    json!({ "error": { "kind": kind, "message": message, "subcommand": sub } })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hash_ignores_run_local_knobs() {
        let a = ExperimentConfig::default();
        let b = ExperimentConfig { threads: Some(3), out: "elsewhere".into(), ..a.clone() };
        assert_eq!(config_hash(&a), config_hash(&b));
        assert_ne!(config_hash(&a), config_hash(&a.clone().with_seed(9)));
    }

    #[test]
    fn runtimes_are_stripped_at_any_depth() {
        let mut v = json!({ "runtime_s": 1.0, "rows": [{ "runtime_s": 2.0, "x": 1 }] });
        strip_runtimes(&mut v);
        assert_eq!(v, json!({ "rows": [{ "x": 1 }] }));
    }
}
