//! In-memory run outputs, written to disk only at the end of a run.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::Duration;

use pmp_core::{Error, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

/// Name of the wall-clock file; excluded from reproducibility hashes.
pub const TIMING_FILE: &str = "timing.csv";

#[derive(Debug, Default)]
pub struct Output {
    files: BTreeMap<String, Vec<u8>>,
    timing: Vec<(String, f64)>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

impl Output {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn bytes(&mut self, name: &str, data: Vec<u8>) {
        self.files.insert(name.to_string(), data);
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut text = serde_json::to_vec_pretty(value)?;
        text.push(b'\n');
        self.bytes(name, text);
        Ok(())
    }

    /// CSV with a header row; every record must match the header width.
    pub fn csv<R, I>(&mut self, name: &str, header: &[&str], rows: I) -> Result<()>
    where
        R: IntoIterator,
        R::Item: ToString,
        I: IntoIterator<Item = R>,
    {
        let mut w = csv::Writer::from_writer(Vec::new());
        let io = |e: csv::Error| Error::Io(std::io::Error::other(e));
        w.write_record(header).map_err(io)?;
        for row in rows {
            let rec: Vec<String> = row.into_iter().map(|v| v.to_string()).collect();
            if rec.len() != header.len() {
                return Err(Error::Structural(format!("{name}: record width {} differs from header", rec.len())));
            }
            w.write_record(&rec).map_err(io)?;
        }
        let data = w.into_inner().map_err(|e| Error::Io(std::io::Error::other(e.to_string())))?;
        self.bytes(name, data);
        Ok(())
    }

    pub fn time(&mut self, phase: &str, elapsed: Duration) {
        self.timing.push((phase.to_string(), elapsed.as_secs_f64()));
    }

    pub fn get(&self, name: &str) -> Option<&[u8]> {
        self.files.get(name).map(Vec::as_slice)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.files.keys().map(String::as_str)
    }

    /// SHA-256 of every reproducible file.
    pub fn hashes(&self) -> BTreeMap<String, String> {
        self.files.iter().map(|(k, v)| (k.clone(), sha256_hex(v))).collect()
    }

    pub fn write_to(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        for (name, data) in &self.files {
            let path = dir.join(name);
            if let Some(parent) = path.parent() {
                std::fs::create_dir_all(parent)?;
            }
            std::fs::write(path, data)?;
        }
        let mut t = String::from("phase,seconds\n");
        for (phase, secs) in &self.timing {
            t.push_str(&format!("{phase},{secs}\n"));
        }
        std::fs::write(dir.join(TIMING_FILE), t)?;
        Ok(())
    }
}
