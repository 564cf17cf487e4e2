//! CSV datasets: `#` metadata lines, a header row, then numbers with 17
//! significant digits so reruns can be compared byte for byte.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::config::ExperimentConfig;
use crate::error::{ExperimentError, Result};

/// One panel's table.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    /// File stem, e.g. `ramp_relaxation` or `gamma_maps_rho00_1`.
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    /// Extra `key = value` lines specific to this panel.
    pub notes: Vec<(String, String)>,
}

impl Dataset {
    pub fn new(name: impl Into<String>, columns: &[&str]) -> Self {
        Self {
            name: name.into(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
            notes: Vec::new(),
        }
    }

    pub fn with_note(mut self, key: &str, value: impl ToString) -> Self {
        self.notes.push((key.to_string(), value.to_string()));
        self
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.columns.len(), "row width of {}", self.name);
        self.rows.push(row);
    }

    /// Values of one column, by name.
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let idx = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[idx]).collect())
    }

    /// Full CSV text including the metadata header.
    pub fn render(&self, config: &ExperimentConfig) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# tool = kpo {}", env!("CARGO_PKG_VERSION"));
        let _ = writeln!(out, "# experiment = {}", config.experiment);
        for (key, value) in config.settings() {
            let _ = writeln!(out, "# {key} = {value}");
        }
        for (key, value) in &self.notes {
            let _ = writeln!(out, "# {key} = {value}");
        }
        out.push_str(&self.columns.join(","));
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|&x| format_number(x)).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }

    /// Writes `<dir>/<name>.csv` and returns the path.
    pub fn write(&self, dir: &Path, config: &ExperimentConfig) -> Result<PathBuf> {
        let io = |path: &Path| {
            let path = path.display().to_string();
            move |source| ExperimentError::Io { path, source }
        };
        fs::create_dir_all(dir).map_err(io(dir))?;
        let path = dir.join(format!("{}.csv", self.name));
        fs::write(&path, self.render(config)).map_err(io(&path))?;
        Ok(path)
    }
}

/// Scientific notation with 17 significant digits.
pub fn format_number(x: f64) -> String {
    if x == 0.0 {
        // avoid a signed zero differing between otherwise equal runs
        return "0".to_string();
    }
    format!("{x:.16e}")
}
