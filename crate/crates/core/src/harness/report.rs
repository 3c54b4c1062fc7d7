//! Run reports: named CSV tables plus summary scalars, written atomically.

use crate::error::Result;
use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

/// One tabular payload: a CSV header line and data rows.
#[derive(Debug, Clone)]
pub struct Table {
    /// Empty name marks the experiment's main table.
    pub name: String,
    pub csv: String,
}

/// Outcome of one experiment run.
#[derive(Debug, Clone)]
pub struct RunReport {
    pub experiment: &'static str,
    pub config_hash: String,
    pub tables: Vec<Table>,
    pub summary: BTreeMap<String, f64>,
    pub wall_ms: u128,
}

impl RunReport {
    pub fn main_table(&self) -> Option<&Table> {
        self.tables.iter().find(|t| t.name.is_empty())
    }

    fn file_stem(&self) -> String {
        format!("{}_{}", self.experiment, self.config_hash)
    }

    /// Write the report under `dir`; `format` is "csv" or "json". Returns
    /// the paths written.
    pub fn write(&self, dir: &Path, format: &str) -> Result<Vec<PathBuf>> {
        fs::create_dir_all(dir)?;
        let mut written = Vec::new();
        if format == "json" {
            let path = dir.join(format!("{}.json", self.file_stem()));
            atomic_write(&path, self.to_json().as_bytes())?;
            written.push(path);
        } else {
            for t in &self.tables {
                let name = if t.name.is_empty() {
                    format!("{}.csv", self.file_stem())
                } else {
                    format!("{}_{}.csv", self.file_stem(), t.name)
                };
                let path = dir.join(name);
                atomic_write(&path, t.csv.as_bytes())?;
                written.push(path);
            }
            let path = dir.join(format!("{}_summary.csv", self.file_stem()));
            let mut s = String::from("quantity,value\n");
            for (k, v) in &self.summary {
                s.push_str(&format!("{k},{v:.9e}\n"));
            }
            atomic_write(&path, s.as_bytes())?;
            written.push(path);
        }
        Ok(written)
    }

    /// Whole report as one JSON document (tables embedded row-wise).
    pub fn to_json(&self) -> String {
        let tables: Vec<serde_json::Value> = self
            .tables
            .iter()
            .map(|t| {
                let mut lines = t.csv.lines();
                let header: Vec<&str> = lines.next().unwrap_or("").split(',').collect();
                let rows: Vec<Vec<serde_json::Value>> = lines
                    .map(|l| {
                        l.split(',')
                            .map(|v| {
                                v.parse::<f64>()
                                    .map(|f| {
                                        serde_json::Number::from_f64(f)
                                            .map(serde_json::Value::Number)
                                            .unwrap_or(serde_json::Value::Null)
                                    })
                                    .unwrap_or_else(|_| serde_json::Value::String(v.into()))
                            })
                            .collect()
                    })
                    .collect();
                serde_json::json!({
                    "name": if t.name.is_empty() { "main" } else { &t.name },
                    "columns": header,
                    "rows": rows,
                })
            })
            .collect();
        let doc = serde_json::json!({
            "experiment": self.experiment,
            "config_hash": self.config_hash,
            "summary": self.summary,
            "tables": tables,
            "wall_ms": self.wall_ms as u64,
        });
        serde_json::to_string_pretty(&doc).expect("report serializes")
    }
}

/// Write via a temp file in the same directory plus rename.
pub fn atomic_write(path: &Path, data: &[u8]) -> Result<()> {
    let dir = path.parent().unwrap_or(Path::new("."));
    let tmp = dir.join(format!(
        ".tmp_{}_{}",
        std::process::id(),
        path.file_name().map(|s| s.to_string_lossy()).unwrap_or_default()
    ));
    fs::write(&tmp, data)?;
    fs::rename(&tmp, path)?;
    Ok(())
}
