use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use ciq_core::{Error, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

/// Six significant digits; empty for NaN.
pub fn num(x: f64) -> String {
    if x.is_nan() {
        return String::new();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{x:.5e}");
    let exp: i32 = sci.split_once('e').map_or(0, |(_, e)| e.parse().unwrap_or(0));
    if (-5..=5).contains(&exp) {
        format!("{:.*}", (5 - exp) as usize, x)
    } else {
        sci
    }
}

pub fn opt_num(x: Option<f64>) -> String {
    x.map_or_else(String::new, num)
}

fn io_error(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| io_error(path, e))?;
    Ok(hex::encode(Sha256::digest(bytes)))
}

/// CSV writer collecting rows in memory and writing them in one call.
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

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(|e| csv_io(path, e))?;
        w.write_record(&self.header).map_err(|e| csv_io(path, e))?;
        for r in &self.rows {
            w.write_record(r).map_err(|e| csv_io(path, e))?;
        }
        w.flush().map_err(|e| io_error(path, e))
    }
}

fn csv_io(path: &Path, e: csv::Error) -> Error {
    io_error(path, std::io::Error::other(e.to_string()))
}

#[derive(Debug, Serialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
}

/// Provenance record written next to every command's outputs.
#[derive(Debug, Serialize)]
pub struct Manifest<'a, C: Serialize> {
    pub command: &'a str,
    pub version: &'a str,
    pub config_sha256: String,
    pub seed: u64,
    pub config: &'a C,
    /// Command-line options that affect the outputs.
    pub options: &'a BTreeMap<String, String>,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
}

/// Output directory plus the files written into it.
pub struct OutputDir {
    dir: PathBuf,
    written: Vec<String>,
}

impl OutputDir {
    pub fn create(dir: &Path) -> Result<Self> {
        std::fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            written: Vec::new(),
        })
    }

    pub fn write_table(&mut self, name: &str, table: &Table) -> Result<()> {
        table.write(&self.dir.join(name))?;
        self.written.push(name.to_string());
        Ok(())
    }

    pub fn digests(&self) -> Result<Vec<FileDigest>> {
        self.written
            .iter()
            .map(|name| {
                Ok(FileDigest {
                    path: name.clone(),
                    sha256: sha256_file(&self.dir.join(name))?,
                })
            })
            .collect()
    }

    pub fn write_manifest<C: Serialize>(&self, name: &str, manifest: &Manifest<'_, C>) -> Result<()> {
        let path = self.dir.join(name);
        let mut text = serde_json::to_string_pretty(manifest).expect("manifest serializes");
        text.push('\n');
        std::fs::write(&path, text).map_err(|e| io_error(&path, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn six_significant_digits() {
        assert_eq!(num(0.1), "0.100000");
        assert_eq!(num(-7.05), "-7.05000");
        assert_eq!(num(123456.7), "123457");
        assert_eq!(num(9.999995), "10.0000");
        assert_eq!(num(1.5e-7), "1.50000e-7");
        assert_eq!(num(2.5e9), "2.50000e9");
        assert_eq!(num(0.0), "0");
        assert_eq!(num(-0.0), "0");
        assert_eq!(num(f64::NAN), "");
        assert_eq!(opt_num(None), "");
    }

    #[test]
    fn formatted_values_round_trip_to_six_digits() {
        for &x in &[1.0 / 3.0, -2.0 / 7.0, 12345.678, 0.000123456789, 98765.4321e-9] {
            let back: f64 = num(x).parse().unwrap();
            assert!(((back - x) / x).abs() < 5e-6, "{x} -> {}", num(x));
        }
    }
}
