//! CSV and JSON emission.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::HarnessError;

/// Floating-point cell with 17 significant digits; `None` is an empty cell.
pub fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        "NaN".to_string()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".to_string() } else { "-inf".to_string() }
    } else {
        format!("{x:.16e}")
    }
}

pub fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_default()
}

pub struct Csv {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Csv {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        Self { header: header.into_iter().map(Into::into).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn render(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }
}

fn ensure_dir(dir: &Path) -> Result<(), HarnessError> {
    fs::create_dir_all(dir).map_err(|e| HarnessError::Io(format!("{}: {e}", dir.display())))
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<(), HarnessError> {
    let mut f = fs::File::create(path).map_err(|e| HarnessError::Io(format!("{}: {e}", path.display())))?;
    f.write_all(bytes).map_err(|e| HarnessError::Io(format!("{}: {e}", path.display())))
}

pub fn write_csv(dir: &Path, name: &str, csv: &Csv) -> Result<PathBuf, HarnessError> {
    ensure_dir(dir)?;
    let path = dir.join(name);
    write_bytes(&path, csv.render().as_bytes())?;
    Ok(path)
}

pub fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<PathBuf, HarnessError> {
    ensure_dir(dir)?;
    let path = dir.join(name);
    let mut text = serde_json::to_string_pretty(value).map_err(|e| HarnessError::Io(e.to_string()))?;
    text.push('\n');
    write_bytes(&path, text.as_bytes())?;
    Ok(path)
}

/// JSON-safe number: non-finite values become `null`.
pub fn finite(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}
