//! Rectangular numeric result tables and their CSV form.

use std::io::Write;
use std::path::{Path, PathBuf};

use crate::error::{HarnessError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct ResultTable {
    pub experiment: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    /// Key-value lines written as `#` comments above the header.
    pub metadata: Vec<(String, String)>,
}

impl ResultTable {
    pub fn new(experiment: &str, columns: &[&str]) -> Self {
        Self {
            experiment: experiment.to_string(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
            metadata: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        assert_eq!(row.len(), self.columns.len(), "row width must match the header");
        self.rows.push(row);
    }

    pub fn note(&mut self, key: &str, value: impl ToString) {
        self.metadata.push((key.to_string(), value.to_string()));
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    /// Values of one column, in row order.
    pub fn values(&self, name: &str) -> Vec<f64> {
        let k = self.column(name).unwrap_or_else(|| panic!("no column {name}"));
        self.rows.iter().map(|r| r[k]).collect()
    }

    /// First row whose `key` column equals `value` exactly.
    pub fn row_where(&self, key: &str, value: f64) -> Option<&[f64]> {
        let k = self.column(key)?;
        self.rows.iter().find(|r| r[k] == value).map(|r| r.as_slice())
    }

    pub fn get(&self, row: &[f64], name: &str) -> f64 {
        row[self.column(name).unwrap_or_else(|| panic!("no column {name}"))]
    }

    pub fn metadata_value(&self, key: &str) -> Option<&str> {
        self.metadata.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn write_csv<W: Write>(&self, provenance: &[(String, String)], out: W) -> Result<()> {
        let mut out = out;
        for (k, v) in provenance.iter().chain(&self.metadata) {
            writeln!(out, "# {k}: {v}")?;
        }
        let mut writer = csv::Writer::from_writer(out);
        let io = |e: csv::Error| HarnessError::Io(std::io::Error::other(e));
        writer.write_record(&self.columns).map_err(io)?;
        for row in &self.rows {
            writer.write_record(row.iter().map(|x| x.to_string())).map_err(io)?;
        }
        writer.flush()?;
        Ok(())
    }

    pub fn file_name(&self, seed: u64) -> String {
        format!("{}_{seed}.csv", self.experiment)
    }

    pub fn save(&self, dir: &Path, seed: u64, provenance: &[(String, String)]) -> Result<PathBuf> {
        std::fs::create_dir_all(dir)?;
        let path = dir.join(self.file_name(seed));
        let mut bytes = Vec::new();
        self.write_csv(provenance, &mut bytes)?;
        std::fs::write(&path, bytes)?;
        Ok(path)
    }
}

/// Output of `git describe`, or "unknown" outside a work tree.
pub fn git_describe() -> String {
    std::process::Command::new("git")
        .args(["describe", "--always", "--dirty", "--tags"])
        .output()
        .ok()
        .filter(|o| o.status.success())
        .and_then(|o| String::from_utf8(o.stdout).ok())
        .map(|s| s.trim().to_string())
        .filter(|s| !s.is_empty())
        .unwrap_or_else(|| "unknown".into())
}
