//! Output files are rendered in memory first and written only after every
//! computation succeeded, each through a temporary file that is renamed into
//! place.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use tempfile::NamedTempFile;

use crate::error::{CliError, CliResult};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Serialize)]
struct Envelope<'a, C, R> {
    schema_version: u32,
    command: &'a str,
    config: &'a C,
    result: &'a R,
}

#[derive(Default)]
pub struct Outputs {
    files: Vec<(String, Vec<u8>)>,
}

impl Outputs {
    pub fn json<C: Serialize, R: Serialize>(&mut self, name: &str, command: &str, config: &C, result: &R) {
        let env = Envelope {
            schema_version: SCHEMA_VERSION,
            command,
            config,
            result,
        };
        let mut text = serde_json::to_string_pretty(&env).expect("serializable output");
        text.push('\n');
        self.files.push((name.to_string(), text.into_bytes()));
    }

    pub fn csv(&mut self, name: &str, table: Table) {
        self.files.push((name.to_string(), table.render().into_bytes()));
    }

    pub fn raw(&mut self, name: &str, bytes: Vec<u8>) {
        self.files.push((name.to_string(), bytes));
    }

    /// Writes every file into `dir`, returning the paths written.
    pub fn commit(self, dir: &Path) -> CliResult<Vec<PathBuf>> {
        let fail = |path: &Path, source| CliError::Output {
            path: path.display().to_string(),
            source,
        };
        std::fs::create_dir_all(dir).map_err(|e| fail(dir, e))?;
        let mut staged = Vec::with_capacity(self.files.len());
        for (name, bytes) in &self.files {
            let target = dir.join(name);
            let mut tmp = NamedTempFile::new_in(dir).map_err(|e| fail(&target, e))?;
            tmp.write_all(bytes).map_err(|e| fail(&target, e))?;
            staged.push((tmp, target));
        }
        let mut written = Vec::with_capacity(staged.len());
        for (tmp, target) in staged {
            tmp.persist(&target).map_err(|e| fail(&target, e.error))?;
            written.push(target);
        }
        Ok(written)
    }
}

/// Minimal CSV table with numeric cells in shortest round-trip form.
pub struct Table {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: AsRef<str>>(header: &[S]) -> Self {
        Self {
            header: header.iter().map(|s| s.as_ref().to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    fn render(&self) -> String {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        w.write_record(&self.header).expect("in-memory write");
        for r in &self.rows {
            w.write_record(r).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8")
    }
}

/// Cell text for a number; non-finite values become empty cells.
pub fn num(v: f64) -> String {
    if v.is_finite() {
        format!("{v}")
    } else {
        String::new()
    }
}
