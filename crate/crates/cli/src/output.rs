//! CSV tables with a commented parameter header, and the run manifest.

use std::path::{Path, PathBuf};

use octacage_core::CageConfig;
use serde::Serialize;

use crate::Failure;

/// A plot-ready table. Comment lines precede the header row.
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
    pub notes: Vec<String>,
}

impl Table {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        Self {
            header: header.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
            notes: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn render(&self, subcommand: &str, config: &CageConfig) -> Result<String, Failure> {
        let mut out = String::new();
        out.push_str(&format!("# octacage {} {subcommand}\n", env!("CARGO_PKG_VERSION")));
        out.push_str(&format!("# config_hash = {}\n", config.hash()));
        for line in config.to_toml().lines() {
            out.push_str(&format!("# {line}\n").replace("# \n", "#\n"));
        }
        for note in &self.notes {
            out.push_str(&format!("# {note}\n"));
        }
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header).map_err(Failure::csv)?;
        for r in &self.rows {
            w.write_record(r).map_err(Failure::csv)?;
        }
        let body = w.into_inner().map_err(|e| Failure::csv(e.into_error()))?;
        out.push_str(&String::from_utf8(body).expect("csv output is utf-8"));
        Ok(out)
    }
}

/// Number formatting shared by all tables: shortest round-trip form.
pub fn num(v: f64) -> String {
    format!("{v}")
}

pub fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

#[derive(Debug, Serialize)]
pub struct QuadratureTotals {
    pub volume_nodes_per_pass: usize,
    pub volume_passes: usize,
    pub separation_nodes: usize,
}

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub config_hash: String,
    pub subcommand: String,
    pub config_path: Option<PathBuf>,
    pub outputs: Vec<PathBuf>,
    pub wall_time_s: f64,
    pub quadrature: QuadratureTotals,
}

/// Writes `text` to `path`, or to stdout when no path is given.
pub fn emit(text: &str, path: Option<&Path>) -> Result<(), Failure> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| Failure::io(p, e)),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

impl RunManifest {
    pub fn write(&self, path: &Path) -> Result<(), Failure> {
        let text = serde_json::to_string_pretty(self).expect("manifest serializes");
        std::fs::write(path, text + "\n").map_err(|e| Failure::io(path, e))
    }
}

/// `<output>.manifest.json` next to the table.
pub fn manifest_path(output: &Path) -> PathBuf {
    let mut name = output.file_name().unwrap_or_default().to_os_string();
    name.push(".manifest.json");
    output.with_file_name(name)
}
