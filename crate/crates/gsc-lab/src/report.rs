//! CSV output. Every table starts with a version comment line and a
//! header row; floats are written in Rust's shortest round-trip form,
//! which is lossless for doubles and stable across runs.

use anyhow::{Context, Result};
use std::io::Write;
use std::path::Path;

pub struct CsvTable {
    buffer: String,
}

impl CsvTable {
    pub fn new(columns: &[&str]) -> Self {
        let mut buffer = format!("# gsc {}\n", crate::VERSION);
        buffer.push_str(&columns.join(","));
        buffer.push('\n');
        CsvTable { buffer }
    }

    pub fn row(&mut self, fields: &[String]) {
        self.buffer.push_str(&fields.join(","));
        self.buffer.push('\n');
    }

    pub fn into_string(self) -> String {
        self.buffer
    }

    pub fn write_to(self, path: &Path) -> Result<String> {
        let text = self.buffer;
        if let Some(parent) = path.parent() {
            if !parent.as_os_str().is_empty() {
                std::fs::create_dir_all(parent)?;
            }
        }
        let mut file = std::fs::File::create(path)
            .with_context(|| format!("creating {}", path.display()))?;
        file.write_all(text.as_bytes())?;
        Ok(text)
    }
}

pub fn fmt_f64(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else if v != 0.0 && (v.abs() < 1e-4 || v.abs() >= 1e15) {
        format!("{v:e}")
    } else {
        format!("{v}")
    }
}

/// Seconds column: pinned to zero in deterministic mode so reruns are
/// byte-identical; wall time still lands in the manifest.
pub fn fmt_seconds(seconds: f64, deterministic: bool) -> String {
    if deterministic {
        "0.000".into()
    } else {
        format!("{seconds:.3}")
    }
}
