//! Experiment runner: configs, the four runs, CSV tables and manifests.

pub mod config;
mod runs;

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::hamiltonians::CouplingDraw;

pub use config::{ExperimentConfig, GridScale, ModelKind, Observable, TimeGrid};
pub use runs::{run, run_ground_state_report, run_model_a, run_model_b, run_zeno_compare};

pub const SOFTWARE_VERSION: &str = concat!(env!("CARGO_PKG_NAME"), " ", env!("CARGO_PKG_VERSION"));

/// One observable family over time; first column is `t`.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(name: &str, columns: Vec<String>) -> Self {
        Self {
            name: name.to_string(),
            columns,
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let k = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[k]).collect())
    }

    pub fn file_name(&self) -> String {
        format!("{}.csv", self.name)
    }

    /// CSV text; values carry 16 significant digits.
    pub fn to_csv(&self) -> String {
        let mut s = self.columns.join(",");
        s.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|v| format!("{v:.15e}")).collect();
            s.push_str(&cells.join(","));
            s.push('\n');
        }
        s
    }
}

/// Everything needed to reproduce a run, written as `manifest.txt`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RunManifest {
    pub config_text: String,
    pub software: String,
    pub seeds: Vec<(String, u64)>,
    pub couplings: Vec<CouplingDraw<f64>>,
    pub outputs: Vec<(String, PathBuf)>,
    /// Scalar results (reference values, late-time averages, maxima).
    pub summary: Vec<(String, f64)>,
    pub wall_clock_seconds: f64,
}

impl RunManifest {
    pub fn summary_value(&self, key: &str) -> Option<f64> {
        self.summary.iter().find(|(k, _)| k == key).map(|(_, v)| *v)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "software = {}", self.software);
        let _ = writeln!(s, "wall_clock_seconds = {:.3}", self.wall_clock_seconds);
        for line in self.config_text.lines() {
            let _ = writeln!(s, "config.{line}");
        }
        for (name, seed) in &self.seeds {
            let _ = writeln!(s, "seed.{name} = {seed}");
        }
        for (name, path) in &self.outputs {
            let _ = writeln!(s, "output.{name} = {}", path.display());
        }
        for (key, v) in &self.summary {
            let _ = writeln!(s, "summary.{key} = {v:.15e}");
        }
        for draw in &self.couplings {
            let values: Vec<String> = draw.values.iter().map(|v| format!("{v:?}")).collect();
            let _ = writeln!(s, "[coupling]");
            let _ = writeln!(s, "label = {}", draw.label);
            let _ = writeln!(s, "kind = {}", draw.kind);
            let _ = writeln!(s, "magnitude = {:?}", draw.magnitude);
            let _ = writeln!(s, "seed = {}", draw.seed_used);
            let _ = writeln!(s, "values = {}", values.join(","));
        }
        s
    }
}

/// Output of a run: the manifest plus the tables that were written.
#[derive(Clone, Debug)]
pub struct RunResult {
    pub manifest: RunManifest,
    pub tables: Vec<Table>,
}

impl RunResult {
    pub fn table(&self, name: &str) -> Option<&Table> {
        self.tables.iter().find(|t| t.name == name)
    }
}

/// Refuse registers beyond `max_sites` or the memory budget (two state
/// vectors of 16-byte amplitudes).
pub fn check_capacity(config: &ExperimentConfig) -> Result<()> {
    let n = config.n_total();
    if n > config.max_sites {
        return Err(Error::capacity(format!(
            "{n} sites exceed the configured maximum of {}",
            config.max_sites
        )));
    }
    let bytes = 2u128 * 16 * (1u128 << n);
    let budget = config.memory_budget_mib as u128 * 1024 * 1024;
    if bytes > budget {
        return Err(Error::capacity(format!(
            "{n} sites need about {} MiB, budget is {} MiB",
            bytes / (1024 * 1024),
            config.memory_budget_mib
        )));
    }
    Ok(())
}

/// Write every table and `manifest.txt` into `dir`, filling in the output paths.
pub(crate) fn write_outputs(dir: &Path, tables: &[Table], manifest: &mut RunManifest) -> Result<()> {
    fs::create_dir_all(dir)?;
    for t in tables {
        let path = dir.join(t.file_name());
        fs::write(&path, t.to_csv())?;
        manifest.outputs.push((t.name.clone(), path));
    }
    fs::write(dir.join("manifest.txt"), manifest.to_text())?;
    Ok(())
}
