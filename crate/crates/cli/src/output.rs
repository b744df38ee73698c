//! Table rendering and atomic file persistence. All floats are printed with
//! 17 significant digits so emitted numbers parse back to the same bits.

use crate::error::{CliError, Result};
use std::fs;
use std::path::Path;

/// Column-labelled numeric table, the common shape of every command result.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    /// Column names with units, e.g. `("p", "c")`.
    pub columns: Vec<(String, String)>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(columns: &[(&str, &str)]) -> Self {
        Table {
            columns: columns.iter().map(|(n, u)| (n.to_string(), u.to_string())).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        assert_eq!(row.len(), self.columns.len(), "row width");
        self.rows.push(row);
    }

    fn header(&self, sep: char) -> String {
        let cols: Vec<String> = self
            .columns
            .iter()
            .map(|(n, u)| if u.is_empty() { n.clone() } else { format!("{n} [{u}]") })
            .collect();
        format!("# {}", cols.join(&sep.to_string()))
    }

    /// Plot-ready text: commented header naming columns and units, one
    /// whitespace- or comma-separated line per row.
    pub fn render(&self, sep: char) -> Result<String> {
        if self.rows.is_empty() {
            return Err(CliError::Config("refusing to write an empty table".into()));
        }
        let mut out = String::new();
        out.push_str(&self.header(sep));
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|v| format!("{v:.16e}")).collect();
            out.push_str(&cells.join(&sep.to_string()));
            out.push('\n');
        }
        Ok(out)
    }

    /// Parses text produced by `render`; the inverse up to float parsing.
    pub fn parse_rows(text: &str, sep: char) -> Result<Vec<Vec<f64>>> {
        let mut rows = Vec::new();
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let cells: std::result::Result<Vec<f64>, _> = if sep == ' ' {
                line.split_whitespace().map(str::parse).collect()
            } else {
                line.split(sep).map(|c| c.trim().parse()).collect()
            };
            rows.push(cells.map_err(|e| CliError::Config(format!("bad table line `{line}`: {e}")))?);
        }
        Ok(rows)
    }
}

/// Writes the table as whitespace-separated plot data with a commented
/// header. Refuses empty tables before creating the file.
pub fn emit_plotdata(table: &Table, path: &Path) -> Result<()> {
    let text = table.render(' ')?;
    write_atomic(path, text.as_bytes())
}

/// Same data with comma separation for the `.csv` outputs.
pub fn emit_csv(table: &Table, path: &Path) -> Result<()> {
    let text = table.render(',')?;
    write_atomic(path, text.as_bytes())
}

/// JSON rendering of a table plus command-specific extras. Floats pass
/// through serde_json's shortest round-trip formatting.
pub fn table_json(table: &Table, extras: serde_json::Value) -> Result<serde_json::Value> {
    if table.rows.is_empty() {
        return Err(CliError::Config("refusing to write an empty table".into()));
    }
    let columns: Vec<String> = table.columns.iter().map(|(n, _)| n.clone()).collect();
    let units: Vec<String> = table.columns.iter().map(|(_, u)| u.clone()).collect();
    Ok(serde_json::json!({
        "columns": columns,
        "units": units,
        "rows": table.rows,
        "extras": extras,
    }))
}

/// Write-to-temp then rename, so a killed run never leaves a partial file
/// at the destination.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    fs::create_dir_all(dir).map_err(|e| CliError::Io(dir.display().to_string(), e))?;
    let name = path
        .file_name()
        .ok_or_else(|| CliError::Config(format!("bad output path {}", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp{}", name.to_string_lossy(), std::process::id()));
    fs::write(&tmp, bytes).map_err(|e| CliError::Io(tmp.display().to_string(), e))?;
    fs::rename(&tmp, path).map_err(|e| CliError::Io(path.display().to_string(), e))?;
    Ok(())
}
