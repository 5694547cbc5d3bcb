//! Artifact emission: every run writes its files through one emitter, which
//! records a content hash per file and finishes with a `manifest.json`
//! listing them. Paths in the manifest are relative to the output directory,
//! so two runs of the same config produce byte-identical trees wherever they
//! land.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{AppError, Result};

pub struct Emitter {
    out_dir: PathBuf,
    entries: Vec<ManifestEntry>,
}

#[derive(Debug, Clone, Serialize)]
struct ManifestEntry {
    path: String,
    sha256: String,
}

#[derive(Serialize)]
struct Manifest<'a> {
    files: &'a [ManifestEntry],
}

impl Emitter {
    pub fn new(out_dir: &Path) -> Result<Self> {
        std::fs::create_dir_all(out_dir)
            .map_err(|e| AppError::Io(format!("creating {}: {e}", out_dir.display())))?;
        Ok(Emitter {
            out_dir: out_dir.to_path_buf(),
            entries: Vec::new(),
        })
    }

    pub fn out_dir(&self) -> &Path {
        &self.out_dir
    }

    pub fn write_text(&mut self, rel_path: &str, content: &str) -> Result<()> {
        let full = self.out_dir.join(rel_path);
        std::fs::write(&full, content)
            .map_err(|e| AppError::Io(format!("writing {}: {e}", full.display())))?;
        let digest = Sha256::digest(content.as_bytes());
        let mut hash = String::with_capacity(64);
        for byte in digest {
            write!(hash, "{byte:02x}").expect("writing to a string cannot fail");
        }
        self.entries.push(ManifestEntry {
            path: rel_path.to_string(),
            sha256: hash,
        });
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, rel_path: &str, value: &T) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value)
            .map_err(|e| AppError::Io(format!("serializing {rel_path}: {e}")))?;
        text.push('\n');
        self.write_text(rel_path, &text)
    }

    /// Write the manifest and consume the emitter.
    pub fn finish(mut self) -> Result<()> {
        self.entries.sort_by(|a, b| a.path.cmp(&b.path));
        let manifest = Manifest {
            files: &self.entries,
        };
        let mut text = serde_json::to_string_pretty(&manifest)
            .map_err(|e| AppError::Io(format!("serializing manifest: {e}")))?;
        text.push('\n');
        let full = self.out_dir.join("manifest.json");
        std::fs::write(&full, text)
            .map_err(|e| AppError::Io(format!("writing {}: {e}", full.display())))?;
        Ok(())
    }
}

/// Build a CSV document from a header and row formatter; floats are printed
/// with the shortest round-trip representation so output is reproducible.
pub struct CsvBuilder {
    buf: String,
    columns: usize,
}

impl CsvBuilder {
    pub fn new(header: &[&str]) -> Self {
        let mut buf = String::new();
        buf.push_str(&header.join(","));
        buf.push('\n');
        CsvBuilder {
            buf,
            columns: header.len(),
        }
    }

    pub fn row(&mut self, fields: &[String]) {
        debug_assert_eq!(fields.len(), self.columns);
        self.buf.push_str(&fields.join(","));
        self.buf.push('\n');
    }

    pub fn finish(self) -> String {
        self.buf
    }
}

/// Whitespace-separated plot table, one row per line.
pub fn dat_table(rows: &[Vec<f64>]) -> String {
    let mut out = String::new();
    for row in rows {
        let cells: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
        out.push_str(&cells.join(" "));
        out.push('\n');
    }
    out
}
