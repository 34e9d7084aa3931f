//! Deterministic file formatting: CSV with fixed float formatting, pretty JSON, hashes.

use std::path::Path;

use num_complex::Complex64 as C64;
use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::Failure;

/// Round-trippable float formatting used in every CSV.
pub fn float(x: f64) -> String {
    format!("{x:.16e}")
}

/// A CSV table built in memory: comma separated, LF line endings, no quoting.
pub struct Csv {
    columns: usize,
    text: String,
}

impl Csv {
    pub fn new<S: AsRef<str>>(header: &[S]) -> Self {
        let names: Vec<&str> = header.iter().map(AsRef::as_ref).collect();
        Self { columns: names.len(), text: names.join(",") + "\n" }
    }

    pub fn row(&mut self, cells: Vec<String>) {
        assert_eq!(cells.len(), self.columns, "CSV row width");
        self.text.push_str(&cells.join(","));
        self.text.push('\n');
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.text.into_bytes()
    }
}

pub fn floats(xs: &[f64]) -> Vec<String> {
    xs.iter().map(|&x| float(x)).collect()
}

pub fn complex(z: C64) -> [String; 2] {
    [float(z.re), float(z.im)]
}

pub fn json_bytes<T: Serialize>(v: &T) -> Vec<u8> {
    let mut s = serde_json::to_string_pretty(v).expect("serializable output");
    s.push('\n');
    s.into_bytes()
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// One named output produced by a task.
pub struct Artifact {
    pub name: String,
    pub bytes: Vec<u8>,
}

impl Artifact {
    pub fn csv(name: &str, csv: Csv) -> Self {
        Self { name: name.into(), bytes: csv.into_bytes() }
    }

    pub fn json<T: Serialize>(name: &str, v: &T) -> Self {
        Self { name: name.into(), bytes: json_bytes(v) }
    }
}

/// Writes the artifacts into `dir` and returns their manifest entries.
pub fn write_artifacts(dir: &Path, artifacts: &[Artifact]) -> Result<Vec<Value>, Failure> {
    artifacts
        .iter()
        .map(|a| {
            let path = dir.join(&a.name);
            std::fs::write(&path, &a.bytes).map_err(|e| Failure::invalid("Io", format!("cannot write {}: {e}", path.display())))?;
            Ok(serde_json::json!({ "path": a.name, "sha256": sha256_hex(&a.bytes), "bytes": a.bytes.len() }))
        })
        .collect()
}
