//! Output directory, CSV writing, provenance and the checksum manifest.
//!
//! All files go through one [`OutputDir`], which records them in write
//! order so that the manifest lists every output of a run.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::PipelineConfig;
use crate::error::{CliError, CliResult};

pub const PROVENANCE: &str = "provenance.json";
pub const CONFIG_COPY: &str = "config.toml";
pub const MANIFEST: &str = "manifest.sha256";

pub struct OutputDir {
    root: PathBuf,
    written: Vec<PathBuf>,
}

impl OutputDir {
    pub fn create(root: &Path) -> CliResult<Self> {
        std::fs::create_dir_all(root).map_err(|e| CliError::io(root, e))?;
        Ok(OutputDir {
            root: root.to_path_buf(),
            written: Vec::new(),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn files(&self) -> &[PathBuf] {
        &self.written
    }

    /// Writes `rel` (subdirectories allowed) through a buffered writer.
    pub fn write_with<F>(&mut self, rel: impl AsRef<Path>, f: F) -> CliResult<()>
    where
        F: FnOnce(&mut BufWriter<File>) -> CliResult<()>,
    {
        let rel = rel.as_ref();
        let path = self.root.join(rel);
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        }
        let file = File::create(&path).map_err(|e| CliError::io(&path, e))?;
        let mut w = BufWriter::new(file);
        f(&mut w)?;
        w.flush().map_err(|e| CliError::io(&path, e))?;
        log::debug!("wrote {}", path.display());
        self.written.push(rel.to_path_buf());
        Ok(())
    }

    pub fn write_bytes(&mut self, rel: impl AsRef<Path>, bytes: &[u8]) -> CliResult<()> {
        let rel = rel.as_ref().to_path_buf();
        let path = self.root.join(&rel);
        self.write_with(&rel, |w| w.write_all(bytes).map_err(|e| CliError::io(&path, e)))
    }

    pub fn write_csv(&mut self, rel: impl AsRef<Path>, table: &Table) -> CliResult<()> {
        let rel = rel.as_ref().to_path_buf();
        let path = self.root.join(&rel);
        self.write_with(&rel, |w| table.write(w).map_err(|e| CliError::io(&path, e)))
    }

    pub fn write_json<T: Serialize>(&mut self, rel: impl AsRef<Path>, value: &T) -> CliResult<()> {
        let text = serde_json::to_string_pretty(value).expect("report serializes");
        self.write_bytes(rel, format!("{text}\n").as_bytes())
    }

    /// Writes the effective config, the provenance record and the manifest.
    /// The manifest uses `sha256sum` format and covers every other file.
    pub fn finish(mut self, config: &PipelineConfig, provenance: &Provenance) -> CliResult<Vec<PathBuf>> {
        self.write_bytes(CONFIG_COPY, config.to_toml().as_bytes())?;
        self.write_json(PROVENANCE, provenance)?;
        let mut manifest = String::new();
        for rel in &self.written {
            let path = self.root.join(rel);
            let bytes = std::fs::read(&path).map_err(|e| CliError::io(&path, e))?;
            let digest = Sha256::digest(&bytes);
            let hex: String = digest.iter().map(|b| format!("{b:02x}")).collect();
            manifest.push_str(&format!("{hex}  {}\n", rel.to_string_lossy().replace('\\', "/")));
        }
        self.write_bytes(MANIFEST, manifest.as_bytes())?;
        Ok(self.written)
    }
}

/// Enough to rerun a command and get the same files.
#[derive(Clone, Debug, Serialize)]
pub struct Provenance {
    pub command: String,
    pub tool_version: String,
    pub core_version: String,
    pub seed: u64,
    pub method: String,
    pub threads: usize,
    /// The effective configuration after flag and environment overrides.
    pub config: serde_json::Value,
    pub notes: Vec<String>,
}

impl Provenance {
    pub fn new(command: &str, config: &PipelineConfig, threads: usize) -> Self {
        Provenance {
            command: command.to_string(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            core_version: xpcs_core::VERSION.to_string(),
            seed: config.seed,
            method: format!("{:?}", config.method).to_lowercase(),
            threads,
            config: serde_json::to_value(config).expect("config serializes"),
            notes: Vec::new(),
        }
    }
}

/// A numeric CSV table.
#[derive(Clone, Debug, Default)]
pub struct Table {
    header: Vec<String>,
    rows: Vec<Vec<Cell>>,
}

#[derive(Clone, Debug)]
pub enum Cell {
    Num(f64),
    Int(i64),
    Text(String),
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<u64> for Cell {
    fn from(v: u64) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<i64> for Cell {
    fn from(v: i64) -> Self {
        Cell::Int(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Text(v)
    }
}

impl Table {
    pub fn new<S: AsRef<str>>(header: &[S]) -> Self {
        Table {
            header: header.iter().map(|s| s.as_ref().to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn write<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        writeln!(w, "{}", self.header.join(","))?;
        for row in &self.rows {
            let line: Vec<String> = row.iter().map(Cell::render).collect();
            writeln!(w, "{}", line.join(","))?;
        }
        Ok(())
    }
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Num(v) => number(*v),
            Cell::Int(v) => v.to_string(),
            Cell::Text(s) if s.contains([',', '"', '\n']) => format!("\"{}\"", s.replace('"', "\"\"")),
            Cell::Text(s) => s.clone(),
        }
    }
}

/// Shortest round-trip form with '.' as the decimal mark; exponent form
/// outside [1e-4, 1e15).
pub fn number(v: f64) -> String {
    let a = v.abs();
    if v == 0.0 || (1e-4..1e15).contains(&a) || !v.is_finite() {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

/// Builds a row from heterogeneous values.
#[macro_export]
macro_rules! row {
    ($($v:expr),* $(,)?) => {
        vec![$($crate::output::Cell::from($v)),*]
    };
}
