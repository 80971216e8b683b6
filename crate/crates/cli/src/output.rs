//! Tables, fields and the JSON summary written by a run.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::CliResult;

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Value {
    Int(u64),
    Num(f64),
    Text(String),
}

impl Value {
    fn render(&self) -> String {
        match self {
            Self::Int(v) => v.to_string(),
            Self::Num(v) => format!("{v:?}"),
            Self::Text(s) => s.clone(),
        }
    }
}

impl From<f64> for Value {
    fn from(v: f64) -> Self {
        Self::Num(v)
    }
}

impl From<usize> for Value {
    fn from(v: usize) -> Self {
        Self::Int(v as u64)
    }
}

impl From<&str> for Value {
    fn from(s: &str) -> Self {
        Self::Text(s.into())
    }
}

impl From<String> for Value {
    fn from(s: String) -> Self {
        Self::Text(s)
    }
}

impl From<bool> for Value {
    fn from(b: bool) -> Self {
        Self::Text(b.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Value>>,
}

impl Table {
    pub fn new(name: &str, columns: &[&str]) -> Self {
        Self {
            name: name.into(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn with_columns(name: &str, columns: Vec<String>) -> Self {
        Self {
            name: name.into(),
            columns,
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Value>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn write_csv(&self, path: &Path) -> CliResult<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(&self.columns)?;
        for row in &self.rows {
            w.write_record(row.iter().map(Value::render))?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Unit of a column, by name.
pub fn unit_of(column: &str) -> &'static str {
    match column {
        "h" | "epsilon" | "delta" | "layer_width" | "outer_distance" | "spacing" | "side" => "length",
        "solver_iters" | "eigen_iters" | "iterations" | "unknowns" | "nodes" | "layers" | "dropped_empty_layers" | "index" | "i" | "j"
        | "seed" => "count",
        "case" | "regime" | "verdict" | "expected" | "matches" | "check" | "passed" | "detail" | "status" => "label",
        _ => "dimensionless",
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Provenance {
    pub version: &'static str,
    pub seed: u64,
    pub timestamp: String,
    pub threads: usize,
}

#[derive(Debug, Clone, Default)]
pub struct Report {
    pub tables: Vec<Table>,
    /// Scientific observations that do not fail the run.
    pub findings: Vec<String>,
    /// Per-row failures; the run exits nonzero when any are present.
    pub errors: Vec<String>,
    pub fields: Vec<(String, String)>,
}

#[derive(Serialize)]
struct Summary<'a> {
    experiment: &'a str,
    config: &'a str,
    tables: BTreeMap<&'a str, &'a Table>,
    units: BTreeMap<&'a str, &'static str>,
    findings: &'a [String],
    errors: &'a [String],
    provenance: &'a Provenance,
}

pub struct Written {
    pub files: Vec<PathBuf>,
}

pub fn write_report(
    dir: &Path,
    experiment: &str,
    config_echo: &str,
    report: &Report,
    provenance: &Provenance,
    csv: bool,
    summary: bool,
) -> CliResult<Written> {
    fs::create_dir_all(dir)?;
    let mut files = Vec::new();
    if csv {
        for t in &report.tables {
            let path = dir.join(format!("{}.csv", t.name));
            t.write_csv(&path)?;
            files.push(path);
        }
    }
    if !report.fields.is_empty() {
        let fdir = dir.join("fields");
        fs::create_dir_all(&fdir)?;
        for (name, text) in &report.fields {
            let path = fdir.join(format!("{name}.txt"));
            fs::write(&path, text)?;
            files.push(path);
        }
    }
    if summary {
        let units = report
            .tables
            .iter()
            .flat_map(|t| t.columns.iter())
            .map(|c| (c.as_str(), unit_of(c)))
            .collect();
        let s = Summary {
            experiment,
            config: config_echo,
            tables: report.tables.iter().map(|t| (t.name.as_str(), t)).collect(),
            units,
            findings: &report.findings,
            errors: &report.errors,
            provenance,
        };
        let path = dir.join("summary.json");
        let text = serde_json::to_string_pretty(&s).map_err(std::io::Error::other)?;
        fs::write(&path, text + "\n")?;
        files.push(path);
    }
    Ok(Written { files })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_uses_round_trip_formatting() {
        let dir = tempfile::tempdir().unwrap();
        let mut t = Table::new("t", &["epsilon", "case"]);
        t.push(vec![0.1.into(), "dirichlet-1".into()]);
        t.push(vec![1e-20.into(), "x,y".into()]);
        let path = dir.path().join("t.csv");
        t.write_csv(&path).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert_eq!(text, "epsilon,case\n0.1,dirichlet-1\n1e-20,\"x,y\"\n");
    }

    #[test]
    fn units_cover_known_columns() {
        assert_eq!(unit_of("h"), "length");
        assert_eq!(unit_of("solver_iters"), "count");
        assert_eq!(unit_of("pairing_err_phi3"), "dimensionless");
    }
}
