//! CSV emission and parsing, and atomic file output.
//!
//! Files start with a `# meta:` comment block, followed by a mandatory header
//! row. Numbers use Rust's shortest round-trip formatting.

use std::io::Write as _;
use std::path::Path;

use csv::{ReaderBuilder, Trim};
use tempfile::NamedTempFile;

use crate::error::{CliError, Result};

pub const FRINGE_COLUMNS: [&str; 5] = ["phi_rad", "mean_photons", "noise_photons", "sensitivity_rad", "singular_flag"];
pub const SWEEP_COLUMNS: [&str; 5] = ["eta", "delta_phi_min_rad", "snl_rad", "ratio", "phi_opt_rad"];
pub const SCAN_COLUMNS: [&str; 5] = ["position_mm", "phi_rad", "n_pulses_kept", "mean_photons", "std_photons"];

/// A CSV table with its metadata block.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub meta: Vec<(String, String)>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(meta: Vec<(String, String)>, columns: &[&str]) -> Self {
        Self {
            meta,
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut out = Vec::new();
        for (key, value) in &self.meta {
            let _ = writeln!(out, "# meta: {key}={value}");
        }
        {
            let mut writer = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(&mut out);
            writer.write_record(&self.columns).expect("in-memory write");
            for row in &self.rows {
                writer.write_record(row).expect("in-memory write");
            }
            writer.flush().expect("in-memory write");
        }
        String::from_utf8(out).expect("UTF-8 cells")
    }
}

/// Numeric view of a parsed CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct NumericTable {
    pub meta: Vec<(String, String)>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl NumericTable {
    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    pub fn require(&self, name: &str) -> Result<usize> {
        self.column_index(name)
            .ok_or_else(|| CliError::Data(format!("missing column `{name}` (found: {})", self.columns.join(", "))))
    }

    pub fn column(&self, idx: usize) -> Vec<f64> {
        self.rows.iter().map(|r| r[idx]).collect()
    }
}

/// Parses a CSV whose cells are all numeric (`true`/`false` read as 1/0).
pub fn parse_numeric_csv(text: &str) -> Result<NumericTable> {
    let meta = text
        .lines()
        .filter_map(|l| l.strip_prefix("# meta:"))
        .filter_map(|l| l.trim().split_once('='))
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect();
    // Comment lines are skipped by the reader but still counted in positions.
    let mut reader = ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(Trim::All)
        .from_reader(text.as_bytes());
    let columns: Vec<String> = reader
        .headers()
        .map_err(|e| CliError::Data(format!("unreadable header: {e}")))?
        .iter()
        .map(str::to_string)
        .collect();
    if columns.is_empty() || columns.iter().all(String::is_empty) {
        return Err(CliError::Data("missing header row".into()));
    }
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map(|p| p.line()).unwrap_or(0);
            CliError::Data(format!("line {line}: {e}"))
        })?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let row = record
            .iter()
            .enumerate()
            .map(|(i, cell)| match cell {
                "true" => Ok(1.0),
                "false" => Ok(0.0),
                _ => cell.parse::<f64>().map_err(|_| {
                    CliError::Data(format!("line {line}: column `{}`: `{cell}` is not numeric", columns[i]))
                }),
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    Ok(NumericTable { meta, columns, rows })
}

/// Writes `contents` to `path` through a temporary file in the same directory.
pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = NamedTempFile::new_in(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
    tmp.write_all(contents.as_bytes())?;
    tmp.as_file().sync_all()?;
    tmp.persist(path)
        .map_err(|e| CliError::Io(format!("{}: {}", path.display(), e.error)))?;
    Ok(())
}

/// Shortest round-trip decimal form of a float.
pub fn fmt_f64(v: f64) -> String {
    v.to_string()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip() {
        let mut t = Table::new(vec![("seed".into(), "3".into())], &["a", "b"]);
        t.push(vec![fmt_f64(0.1), "true".into()]);
        t.push(vec![fmt_f64(-2.5e-300), "false".into()]);
        let text = t.to_csv();
        assert!(text.starts_with("# meta: seed=3\na,b\n"));
        let parsed = parse_numeric_csv(&text).unwrap();
        assert_eq!(parsed.meta, vec![("seed".to_string(), "3".to_string())]);
        assert_eq!(parsed.rows, vec![vec![0.1, 1.0], vec![-2.5e-300, 0.0]]);
    }

    #[test]
    fn errors_carry_line_numbers() {
        let err = parse_numeric_csv("# meta: x=1\na,b\n1,2\n3,oops\n").unwrap_err();
        assert!(err.to_string().contains("line 4"), "{err}");
        assert!(err.to_string().contains("`b`"));
        let err = parse_numeric_csv("a,b\n1,2\n3\n").unwrap_err();
        assert!(err.to_string().contains("line 3"), "{err}");
    }

    #[test]
    fn missing_column_is_reported() {
        let t = parse_numeric_csv("a,b\n1,2\n").unwrap();
        assert!(t.require("c").unwrap_err().to_string().contains("`c`"));
    }
}
