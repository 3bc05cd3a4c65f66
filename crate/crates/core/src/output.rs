//! Result tables, CSV emission and the digest manifest.
//!
//! Numbers are written with six significant digits in the style of C's
//! `%g`, independent of locale. Every file ends with a newline and an empty
//! table still gets its header line.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Result, SimError};

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Num(f64),
    Int(i64),
    Text(String),
    Flag(bool),
}

impl From<f64> for Value {
    fn from(v: f64) -> Self {
        Value::Num(v)
    }
}

impl From<usize> for Value {
    fn from(v: usize) -> Self {
        Value::Int(v as i64)
    }
}

impl From<u64> for Value {
    fn from(v: u64) -> Self {
        Value::Int(v as i64)
    }
}

impl From<bool> for Value {
    fn from(v: bool) -> Self {
        Value::Flag(v)
    }
}

impl From<&str> for Value {
    fn from(v: &str) -> Self {
        Value::Text(v.to_string())
    }
}

/// `%.6g`-style formatting.
pub fn format_g6(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{x:.5e}");
    let (mant, exp) = sci.split_once('e').unwrap_or((&sci, "0"));
    let exp: i32 = exp.parse().unwrap_or(0);
    if !(-4..6).contains(&exp) {
        let mant = trim_zeros(mant);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{mant}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (5 - exp).max(0) as usize;
        trim_zeros(&format!("{x:.decimals$}")).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

impl Value {
    fn render(&self) -> String {
        match self {
            Value::Num(x) => format_g6(*x),
            Value::Int(i) => i.to_string(),
            Value::Text(s) => s.clone(),
            Value::Flag(b) => u8::from(*b).to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    /// File name without extension.
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<Value>>,
}

impl Table {
    pub fn new(name: impl Into<String>, header: &[&str]) -> Self {
        Self {
            name: name.into(),
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Value>) {
        debug_assert_eq!(row.len(), self.header.len(), "row width in {}", self.name);
        self.rows.push(row);
    }

    pub fn file_name(&self) -> String {
        format!("{}.csv", self.name)
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut out = self.header.join(",");
        out.push('\n');
        for (i, row) in self.rows.iter().enumerate() {
            if row.len() != self.header.len() {
                return Err(SimError::Runtime(format!(
                    "{}: row {i} has {} fields, header has {}",
                    self.name,
                    row.len(),
                    self.header.len()
                )));
            }
            let fields: Vec<String> = row.iter().map(Value::render).collect();
            if let Some(bad) = fields.iter().find(|f| f.contains([',', '\n', '"'])) {
                return Err(SimError::Runtime(format!("{}: field {bad:?} needs quoting", self.name)));
            }
            out.push_str(&fields.join(","));
            out.push('\n');
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub file: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub files: Vec<ManifestEntry>,
}

pub const MANIFEST_FILE: &str = "manifest.json";

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Writes `tables` as CSV into `out_dir` plus a manifest of their digests.
///
/// Files are written in name order. On failure every file this call
/// created is removed again.
pub fn write_results(tables: &[Table], out_dir: &Path) -> Result<Manifest> {
    let mut rendered: Vec<(String, String)> = tables
        .iter()
        .map(|t| Ok((t.file_name(), t.to_csv()?)))
        .collect::<Result<_>>()?;
    rendered.sort_by(|a, b| a.0.cmp(&b.0));
    if let Some(w) = rendered.windows(2).find(|w| w[0].0 == w[1].0) {
        return Err(SimError::Runtime(format!("duplicate output table {}", w[0].0)));
    }
    std::fs::create_dir_all(out_dir).map_err(|e| SimError::io(out_dir, e))?;
    let mut written: Vec<PathBuf> = Vec::new();
    let result = (|| {
        let mut files = Vec::new();
        for (name, body) in &rendered {
            let path = out_dir.join(name);
            std::fs::write(&path, body).map_err(|e| SimError::io(&path, e))?;
            written.push(path);
            files.push(ManifestEntry {
                file: name.clone(),
                bytes: body.len() as u64,
                sha256: sha256_hex(body.as_bytes()),
            });
        }
        let manifest = Manifest { files };
        let path = out_dir.join(MANIFEST_FILE);
        let json = serde_json::to_string_pretty(&manifest)
            .map_err(|e| SimError::Runtime(format!("serializing manifest: {e}")))?;
        std::fs::write(&path, json + "\n").map_err(|e| SimError::io(&path, e))?;
        written.push(path);
        Ok(manifest)
    })();
    if result.is_err() {
        for p in &written {
            let _ = std::fs::remove_file(p);
        }
    }
    result
}

/// Recomputes digests of the files a manifest lists.
pub fn verify_manifest(out_dir: &Path, manifest: &Manifest) -> Result<bool> {
    for e in &manifest.files {
        let path = out_dir.join(&e.file);
        let bytes = std::fs::read(&path).map_err(|err| SimError::io(&path, err))?;
        if sha256_hex(&bytes) != e.sha256 || bytes.len() as u64 != e.bytes {
            return Ok(false);
        }
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn six_significant_digits() {
        assert_eq!(format_g6(89.3512345), "89.3512");
        assert_eq!(format_g6(0.1), "0.1");
        assert_eq!(format_g6(1.0), "1");
        assert_eq!(format_g6(-95.0), "-95");
        assert_eq!(format_g6(123456.7), "123457");
        assert_eq!(format_g6(1234567.0), "1.23457e+06");
        assert_eq!(format_g6(0.0001), "0.0001");
        assert_eq!(format_g6(0.00001234), "1.234e-05");
        assert_eq!(format_g6(4e6), "4e+06");
        assert_eq!(format_g6(f64::NAN), "nan");
        assert_eq!(format_g6(-0.0), "0");
    }

    #[test]
    fn empty_table_is_header_only() {
        let t = Table::new("empty", &["a", "b"]);
        assert_eq!(t.to_csv().unwrap(), "a,b\n");
    }

    #[test]
    fn manifest_digests_match_files() {
        let dir = tempfile::tempdir().unwrap();
        let mut t = Table::new("x", &["k", "v"]);
        t.push(vec!["a".into(), 1.5.into()]);
        let m = write_results(&[t, Table::new("e", &["z"])], dir.path()).unwrap();
        assert_eq!(m.files.len(), 2);
        assert!(verify_manifest(dir.path(), &m).unwrap());
        std::fs::write(dir.path().join("x.csv"), "k,v\na,2\n").unwrap();
        assert!(!verify_manifest(dir.path(), &m).unwrap());
    }

    #[test]
    fn ragged_row_rejected() {
        let mut t = Table::new("r", &["a", "b"]);
        t.rows.push(vec![1.0.into()]);
        assert!(t.to_csv().is_err());
    }
}
