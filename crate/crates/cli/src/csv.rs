//! Minimal CSV tables with a provenance header.

use std::fmt::Display;
use std::io::Write;
use std::path::Path;

use sha2::{Digest, Sha256};

pub fn sha256_hex(text: &str) -> String {
    Sha256::digest(text.as_bytes())
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// A CSV table whose first lines are `#` comments. Identical inputs render to
/// identical bytes.
#[derive(Debug, Clone)]
pub struct CsvTable {
    comments: Vec<String>,
    columns: Vec<&'static str>,
    rows: Vec<Vec<String>>,
}

impl CsvTable {
    /// Starts a table whose header records the config hash and seed.
    pub fn new(command: &str, config_text: &str, seed: u64, columns: &[&'static str]) -> Self {
        Self {
            comments: vec![format!(
                "otfs {command} config_sha256={} seed={seed}",
                sha256_hex(config_text)
            )],
            columns: columns.to_vec(),
            rows: Vec::new(),
        }
    }

    pub fn comment(&mut self, line: impl Into<String>) {
        self.comments.push(line.into());
    }

    pub fn push(&mut self, row: Vec<String>) {
        assert_eq!(
            row.len(),
            self.columns.len(),
            "row width must match the header"
        );
        self.rows.push(row);
    }

    #[allow(clippy::len_without_is_empty)]
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for c in &self.comments {
            out.push_str("# ");
            out.push_str(c);
            out.push('\n');
        }
        out.push_str(&self.columns.join(","));
        out.push('\n');
        for r in &self.rows {
            out.push_str(&r.join(","));
            out.push('\n');
        }
        out
    }

    /// Writes to `path`, or to stdout when `path` is `None`.
    pub fn write(&self, path: Option<&Path>) -> std::io::Result<()> {
        match path {
            Some(p) => {
                if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                    std::fs::create_dir_all(dir)?;
                }
                std::fs::write(p, self.render())
            }
            None => std::io::stdout().lock().write_all(self.render().as_bytes()),
        }
    }
}

/// Cell formatting shorthand.
pub fn cell(v: impl Display) -> String {
    v.to_string()
}
