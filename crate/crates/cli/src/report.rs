//! Output files of a run: the results CSV, the JSON summary and the config
//! echo.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Serialize;

use crate::config::Resolved;

pub const CSV_SCHEMA_VERSION: u32 = 1;
pub const CSV_COLUMNS: &str = "experiment,phase,step,exploitability,loss,seconds";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResultRow {
    pub experiment: String,
    pub phase: String,
    /// Iteration or epoch.
    pub step: u64,
    pub exploitability: Option<f64>,
    pub loss: Option<f64>,
    /// Wall-clock seconds since the phase started.
    pub seconds: f64,
}

impl ResultRow {
    fn to_csv(&self) -> String {
        let opt = |x: Option<f64>| x.map(|v| format!("{v:.9e}")).unwrap_or_default();
        format!(
            "{},{},{},{},{},{:.3}",
            self.experiment,
            self.phase,
            self.step,
            opt(self.exploitability),
            opt(self.loss),
            self.seconds
        )
    }
}

/// The single writer of `results.csv`. Rows are flushed as they arrive so
/// long runs can be watched.
pub struct CsvSink {
    writer: BufWriter<File>,
    path: PathBuf,
    rows: Vec<ResultRow>,
}

impl CsvSink {
    pub fn create(path: &Path) -> Result<Self> {
        let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
        let mut writer = BufWriter::new(file);
        writeln!(writer, "# rebel results schema v{CSV_SCHEMA_VERSION}")?;
        writeln!(writer, "{CSV_COLUMNS}")?;
        writer.flush()?;
        Ok(Self {
            writer,
            path: path.to_path_buf(),
            rows: Vec::new(),
        })
    }

    pub fn push(&mut self, row: ResultRow) -> Result<()> {
        if let Some(e) = row.exploitability {
            if !(e >= -1e-9) {
                bail!(
                    "exploitability {e} at {} step {} is negative or NaN",
                    row.phase,
                    row.step
                );
            }
        }
        writeln!(self.writer, "{}", row.to_csv())
            .and_then(|_| self.writer.flush())
            .with_context(|| format!("writing {}", self.path.display()))?;
        self.rows.push(row);
        Ok(())
    }

    pub fn rows(&self) -> &[ResultRow] {
        &self.rows
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Versions {
    pub rebel_core: &'static str,
    pub rebel_cli: &'static str,
    pub csv_schema: u32,
}

impl Default for Versions {
    fn default() -> Self {
        Self {
            rebel_core: rebel_core::VERSION,
            rebel_cli: env!("CARGO_PKG_VERSION"),
            csv_schema: CSV_SCHEMA_VERSION,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Summary<T: Serialize> {
    pub experiment: String,
    pub command: &'static str,
    pub seed: u64,
    pub config_hash: String,
    pub versions: Versions,
    pub seconds: f64,
    #[serde(rename = "final")]
    pub metrics: T,
}

/// Creates the output directory and writes the resolved config into it.
pub fn prepare_out(resolved: &Resolved) -> Result<()> {
    fs::create_dir_all(&resolved.out).with_context(|| format!("creating {}", resolved.out.display()))?;
    let path = resolved.out.join("config.toml");
    fs::write(&path, resolved.config.to_toml()).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

pub fn write_summary<T: Serialize>(resolved: &Resolved, command: &'static str, seconds: f64, metrics: T) -> Result<()> {
    let summary = Summary {
        experiment: resolved.config.experiment.clone(),
        command,
        seed: resolved.seed,
        config_hash: resolved.hash(),
        versions: Versions::default(),
        seconds,
        metrics,
    };
    let path = resolved.out.join("summary.json");
    let text = serde_json::to_string_pretty(&summary)?;
    fs::write(&path, text + "\n").with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(e: Option<f64>) -> ResultRow {
        ResultRow {
            experiment: "x".into(),
            phase: "baseline".into(),
            step: 4,
            exploitability: e,
            loss: None,
            seconds: 0.25,
        }
    }

    #[test]
    fn csv_layout() {
        assert_eq!(row(Some(0.5)).to_csv(), "x,baseline,4,5.000000000e-1,,0.250");
    }

    #[test]
    fn negative_exploitability_is_rejected() {
        let dir = std::env::temp_dir().join(format!("rebel-report-{}", std::process::id()));
        fs::create_dir_all(&dir).unwrap();
        let mut sink = CsvSink::create(&dir.join("r.csv")).unwrap();
        assert!(sink.push(row(Some(-1e-12))).is_ok());
        assert!(sink.push(row(Some(-1e-6))).is_err());
        assert!(sink.push(row(Some(f64::NAN))).is_err());
        let text = fs::read_to_string(dir.join("r.csv")).unwrap();
        assert!(text.starts_with("# rebel results schema v1\nexperiment,phase,step"));
        fs::remove_dir_all(dir).ok();
    }
}
