//! CSV and sidecar metadata files, written to a temporary name and renamed
//! into place so a partial file is never visible.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use super::config::RunConfig;
use crate::error::{Error, Result};

/// Shortest round-trip text of a float, `nan` for NaN.
pub fn number(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else {
        x.to_string()
    }
}

/// Writes `bytes` to `path` via a sibling temporary file and a rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d.to_path_buf(),
        _ => PathBuf::from("."),
    };
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let tmp = dir.join(format!(".{name}.tmp{}", std::process::id()));
    let result = (|| {
        let mut file = fs::File::create(&tmp)?;
        file.write_all(bytes)?;
        file.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if let Err(e) = result {
        let _ = fs::remove_file(&tmp);
        return Err(Error::io(path, e));
    }
    Ok(())
}

/// A table plus the settings and results describing it.
#[derive(Debug, Clone)]
pub struct Report {
    pub command: &'static str,
    pub settings: Vec<(&'static str, String)>,
    /// Derived values (resolved cutoff, summary statistics, annotations).
    pub results: Vec<(String, String)>,
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl Report {
    pub fn new(command: &'static str, config: &RunConfig, columns: &[&'static str]) -> Self {
        Report {
            command,
            settings: config.pairs(),
            results: Vec::new(),
            columns: columns.to_vec(),
            rows: Vec::new(),
        }
    }

    pub fn result(&mut self, key: &str, value: impl ToString) {
        self.results.push((key.to_string(), value.to_string()));
    }

    pub fn row(&mut self, cells: Vec<String>) {
        debug_assert_eq!(cells.len(), self.columns.len());
        self.rows.push(cells);
    }

    fn preamble(&self) -> String {
        format!("dicke {} (version {})", self.command, env!("CARGO_PKG_VERSION"))
    }

    pub fn csv(&self) -> String {
        let mut out = format!("# {}\n", self.preamble());
        for (k, v) in &self.settings {
            out.push_str(&format!("# {k} = {v}\n"));
        }
        out.push_str(&self.columns.join(","));
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }

    /// Settings as a loadable config file, results as `#` comment lines.
    pub fn meta(&self) -> String {
        let mut out = format!("# {}\n", self.preamble());
        for (k, v) in &self.settings {
            out.push_str(&format!("{k} = {v}\n"));
        }
        out.push_str("# results\n");
        for (k, v) in &self.results {
            out.push_str(&format!("# {k} = {v}\n"));
        }
        out
    }

    /// Writes `<out>/<command>.csv` and `<out>/<command>.meta`; returns the
    /// CSV path.
    pub fn write(&self, out_dir: &Path) -> Result<PathBuf> {
        let csv = out_dir.join(format!("{}.csv", self.command));
        let meta = out_dir.join(format!("{}.meta", self.command));
        write_atomic(&csv, self.csv().as_bytes())?;
        write_atomic(&meta, self.meta().as_bytes())?;
        Ok(csv)
    }
}

/// Data rows of a CSV written by [`Report::csv`], skipping the header.
pub fn read_rows(text: &str) -> Vec<Vec<String>> {
    text.lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}
