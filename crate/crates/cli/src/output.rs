//! Tables and their CSV/JSON encodings, plus atomic file output.
//!
//! Reals are written with 17 significant digits in CSV so that every value
//! round-trips; JSON uses the shortest round-trip representation. Both
//! encodings are pure functions of the document, so output is byte-stable.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde_json::{Map, Value};
use tempfile::NamedTempFile;

use crate::config::Format;
use crate::CliError;

#[derive(Debug, Clone, PartialEq)]
pub enum MetaValue {
    Real(f64),
    Int(i64),
    Text(String),
}

impl MetaValue {
    fn csv(&self) -> String {
        match self {
            MetaValue::Real(x) => fmt_real(*x),
            MetaValue::Int(i) => i.to_string(),
            MetaValue::Text(s) => s.clone(),
        }
    }

    fn json(&self) -> Value {
        match self {
            MetaValue::Real(x) => Value::from(*x),
            MetaValue::Int(i) => Value::from(*i),
            MetaValue::Text(s) => Value::from(s.as_str()),
        }
    }
}

/// Ordered key-value record of everything needed to reproduce a file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Meta(Vec<(String, MetaValue)>);

impl Meta {
    pub fn new(command: &str) -> Self {
        let mut m = Meta::default();
        m.push("tool", MetaValue::Text(format!("levelcross {}", env!("CARGO_PKG_VERSION"))));
        m.push("command", MetaValue::Text(command.into()));
        m
    }

    pub fn push(&mut self, key: &str, value: MetaValue) {
        self.0.push((key.into(), value));
    }

    pub fn extend(&mut self, other: Meta) {
        self.0.extend(other.0);
    }

    pub fn entries(&self) -> &[(String, MetaValue)] {
        &self.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Column {
    Real(Vec<f64>),
    Int(Vec<i64>),
    Text(Vec<String>),
}

impl Column {
    fn len(&self) -> usize {
        match self {
            Column::Real(v) => v.len(),
            Column::Int(v) => v.len(),
            Column::Text(v) => v.len(),
        }
    }

    fn cell(&self, i: usize) -> String {
        match self {
            Column::Real(v) => fmt_real(v[i]),
            Column::Int(v) => v[i].to_string(),
            Column::Text(v) => v[i].clone(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Column::Real(v) => v.iter().map(|&x| Value::from(x)).collect(),
            Column::Int(v) => v.iter().map(|&x| Value::from(x)).collect(),
            Column::Text(v) => v.iter().map(|x| Value::from(x.as_str())).collect(),
        }
    }
}

/// Named columns of equal length.
#[derive(Debug, Clone, PartialEq)]
pub struct Document {
    pub meta: Meta,
    pub columns: Vec<(String, Column)>,
}

impl Document {
    pub fn new(meta: Meta) -> Self {
        Self { meta, columns: Vec::new() }
    }

    pub fn real(mut self, name: &str, v: Vec<f64>) -> Self {
        self.columns.push((name.into(), Column::Real(v)));
        self
    }

    pub fn int(mut self, name: &str, v: Vec<i64>) -> Self {
        self.columns.push((name.into(), Column::Int(v)));
        self
    }

    pub fn text(mut self, name: &str, v: Vec<String>) -> Self {
        self.columns.push((name.into(), Column::Text(v)));
        self
    }

    pub fn rows(&self) -> usize {
        self.columns.first().map_or(0, |(_, c)| c.len())
    }

    pub fn render(&self, format: Format) -> Result<Vec<u8>, CliError> {
        let n = self.rows();
        if let Some((name, _)) = self.columns.iter().find(|(_, c)| c.len() != n) {
            return Err(CliError::Internal(format!("column {name} has the wrong length")));
        }
        match format {
            Format::Csv => self.csv(),
            Format::Json => Ok(self.json()),
        }
    }

    fn csv(&self) -> Result<Vec<u8>, CliError> {
        let mut buf = Vec::new();
        let comment: Vec<String> = self.meta.0.iter().map(|(k, v)| format!("{k}={}", v.csv())).collect();
        writeln!(buf, "# {}", comment.join(" "))?;
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(buf);
        w.write_record(self.columns.iter().map(|(n, _)| n.as_str())).map_err(csv_err)?;
        for i in 0..self.rows() {
            w.write_record(self.columns.iter().map(|(_, c)| c.cell(i))).map_err(csv_err)?;
        }
        w.into_inner().map_err(|e| CliError::Internal(e.to_string()))
    }

    fn json(&self) -> Vec<u8> {
        let meta: Map<String, Value> = self.meta.0.iter().map(|(k, v)| (k.clone(), v.json())).collect();
        let data: Map<String, Value> = self.columns.iter().map(|(n, c)| (n.clone(), c.json())).collect();
        let mut root = Map::new();
        root.insert("meta".into(), Value::Object(meta));
        root.insert("data".into(), Value::Object(data));
        let mut out = serde_json::to_vec(&Value::Object(root)).expect("a Value always serializes");
        out.push(b'\n');
        out
    }
}

fn csv_err(e: csv::Error) -> CliError {
    CliError::Internal(e.to_string())
}

/// 17 significant digits.
pub fn fmt_real(x: f64) -> String {
    format!("{x:.16e}")
}

/// Writes every file or none: already persisted files are removed if a
/// later one fails, and each file goes through a temporary in its target
/// directory so a reader never sees a partial file.
pub fn write_all(files: &[(PathBuf, Vec<u8>)]) -> Result<(), CliError> {
    let mut done: Vec<&Path> = Vec::with_capacity(files.len());
    for (path, bytes) in files {
        if let Err(e) = write_atomic(path, bytes) {
            for p in done {
                let _ = fs::remove_file(p);
            }
            return Err(e);
        }
        done.push(path);
    }
    Ok(())
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| CliError::Io(e.error))?;
    Ok(())
}

/// `out.csv` → `out_3.csv` for the third member of a sweep.
pub fn indexed_path(base: &Path, index: usize, format: Format) -> PathBuf {
    let stem = base.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let ext = base.extension().map(|e| e.to_string_lossy().into_owned()).unwrap_or_else(|| format.extension().into());
    base.with_file_name(format!("{stem}_{index}.{ext}"))
}
