//! CSV and JSON writers. CSV files have a header row, comma separators, LF
//! line endings and numbers at 12 significant digits.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use super::HarnessError;
use crate::format::fmt_num;

/// Column-oriented table with a leading `t` column.
#[derive(Debug, Clone, Default)]
pub struct SeriesTable {
    headers: Vec<String>,
    columns: Vec<Vec<f64>>,
}

impl SeriesTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, header: impl Into<String>, values: Vec<f64>) {
        self.headers.push(header.into());
        self.columns.push(values);
    }

    /// Renders `t,log10_t,<columns>` for `t = 1..=len`.
    pub fn render(&self) -> String {
        let rows = self.columns.iter().map(Vec::len).max().unwrap_or(0);
        let mut out = String::with_capacity(rows * 16 * (self.columns.len() + 2));
        out.push_str("t,log10_t");
        for h in &self.headers {
            out.push(',');
            out.push_str(h);
        }
        out.push('\n');
        for row in 0..rows {
            let t = row + 1;
            write!(out, "{t},{}", fmt_num((t as f64).log10())).expect("writing to a String");
            for col in &self.columns {
                out.push(',');
                if let Some(&v) = col.get(row) {
                    out.push_str(&fmt_num(v));
                }
            }
            out.push('\n');
        }
        out
    }
}

/// Renders rows of already formatted cells.
pub fn render_rows(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut out = header.join(",");
    out.push('\n');
    for row in rows {
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

/// Hash of `bytes` framed like a git blob object, hex encoded with a
/// `sha256:` prefix.
pub fn content_hash(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(format!("blob {}\0", bytes.len()).as_bytes());
    hasher.update(bytes);
    let digest = hasher.finalize();
    let mut hex = String::with_capacity(7 + 64);
    hex.push_str("sha256:");
    for b in digest.iter() {
        write!(hex, "{b:02x}").expect("writing to a String");
    }
    hex
}

/// Pretty-printed JSON with a trailing newline. Object keys are sorted, so
/// the output is canonical for a given value.
pub fn to_json<T: Serialize>(value: &T) -> Result<String, HarnessError> {
    // going through Value sorts map keys
    let value = serde_json::to_value(value)?;
    let mut s = serde_json::to_string_pretty(&value)?;
    s.push('\n');
    Ok(s)
}

pub fn write_file(dir: &Path, name: &str, contents: &str) -> Result<PathBuf, HarnessError> {
    std::fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
    let path = dir.join(name);
    std::fs::write(&path, contents).map_err(|e| HarnessError::io(&path, e))?;
    Ok(path)
}
