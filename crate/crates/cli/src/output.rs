//! Tabular files, JSON sidecars and the run manifest.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use dilate_core::linalg::CMatrix;

use crate::config::Format;
use crate::error::CliError;

/// Columns of numbers with a header row.
#[derive(Debug, Clone, Serialize)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(columns: Vec<String>) -> Self {
        Self {
            columns,
            rows: Vec::new(),
        }
    }

    /// `t` followed by the row-major entries of an `n × n` matrix as
    /// re/im pairs.
    pub fn for_matrices(prefix: &str, n: usize) -> Self {
        let mut columns = vec!["t".to_string()];
        for i in 0..n {
            for j in 0..n {
                columns.push(format!("{prefix}_{i}_{j}_re"));
                columns.push(format!("{prefix}_{i}_{j}_im"));
            }
        }
        Self::new(columns)
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn push_matrix(&mut self, t: f64, m: &CMatrix) {
        let mut row = Vec::with_capacity(1 + 2 * m.len());
        row.push(t);
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                row.push(m[(i, j)].re);
                row.push(m[(i, j)].im);
            }
        }
        self.push(row);
    }
}

/// 17 significant digits, enough to round-trip every `f64`.
pub fn format_number(x: f64) -> String {
    format!("{x:.16e}")
}

pub struct OutputDir {
    root: PathBuf,
    formats: Vec<Format>,
    written: Vec<String>,
}

impl OutputDir {
    pub fn create(root: &Path, formats: &[Format]) -> Result<Self, CliError> {
        fs::create_dir_all(root)
            .map_err(|e| CliError::io(format!("creating {}", root.display()), e))?;
        Ok(Self {
            root: root.to_path_buf(),
            formats: formats.to_vec(),
            written: Vec::new(),
        })
    }

    pub fn written(&self) -> &[String] {
        &self.written
    }

    fn record(&mut self, name: String) {
        self.written.push(name);
    }

    /// Write `table` as `<stem>.csv` and/or `<stem>.table.json`.
    pub fn table(&mut self, stem: &str, table: &Table) -> Result<(), CliError> {
        if self.formats.contains(&Format::Csv) {
            let name = format!("{stem}.csv");
            let path = self.root.join(&name);
            let io = |e: csv::Error| CliError::io(format!("writing {}", path.display()), e.into());
            let mut w = csv::Writer::from_path(&path).map_err(io)?;
            w.write_record(&table.columns).map_err(io)?;
            for row in &table.rows {
                w.write_record(row.iter().map(|&x| format_number(x)))
                    .map_err(io)?;
            }
            w.flush()
                .map_err(|e| CliError::io(format!("writing {}", path.display()), e))?;
            self.record(name);
        }
        if self.formats.contains(&Format::Json) {
            self.json(&format!("{stem}.table"), table)?;
        }
        Ok(())
    }

    /// Write `value` as pretty-printed `<stem>.json`.
    pub fn json<T: Serialize + ?Sized>(&mut self, stem: &str, value: &T) -> Result<(), CliError> {
        let name = format!("{stem}.json");
        let path = self.root.join(&name);
        let mut text = serde_json::to_string_pretty(value).expect("output types serialize");
        text.push('\n');
        fs::write(&path, text)
            .map_err(|e| CliError::io(format!("writing {}", path.display()), e))?;
        self.record(name);
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct StageTiming {
    pub stage: &'static str,
    pub seconds: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub config_hash: String,
    pub stages: Vec<&'static str>,
    pub implied_stages: Vec<&'static str>,
    pub timings: Vec<StageTiming>,
    pub warnings: Vec<String>,
    pub outputs: Vec<String>,
    pub exit_code: i32,
    pub error: Option<String>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_round_trip_exactly() {
        for x in [
            0.1,
            1.0 / 3.0,
            -2.5e-300,
            6.02214076e23,
            f64::MIN_POSITIVE,
            0.0,
            -0.0,
        ] {
            let back: f64 = format_number(x).parse().unwrap();
            assert_eq!(back.to_bits(), x.to_bits());
        }
    }

    #[test]
    fn matrix_columns_are_row_major_pairs() {
        let t = Table::for_matrices("h", 2);
        assert_eq!(t.columns[0], "t");
        assert_eq!(t.columns[1], "h_0_0_re");
        assert_eq!(t.columns[4], "h_0_1_im");
        assert_eq!(t.columns.len(), 9);
    }
}
