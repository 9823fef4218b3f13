//! Deterministic result files plus the run manifest.
//!
//! Every file except `timings.json` depends only on the configuration, so
//! reruns and different thread counts give byte-identical output.

use serde::Serialize;
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io;
use std::path::{Path, PathBuf};
use std::time::Duration;

/// Fixed 9-significant-digit scientific notation.
pub fn sci(x: f64) -> String {
    format!("{x:.8e}")
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub config_sha256: String,
}

/// Collects CSV rows as text.
pub struct Csv {
    text: String,
}

impl Csv {
    pub fn new(header: &[&str]) -> Self {
        Csv {
            text: header.join(",") + "\n",
        }
    }

    pub fn row(&mut self, fields: &[String]) {
        let _ = writeln!(self.text, "{}", fields.join(","));
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.text.into_bytes()
    }
}

pub struct OutputDir {
    root: PathBuf,
    manifest: Manifest,
    files: BTreeMap<String, String>,
    timings: BTreeMap<String, f64>,
}

impl OutputDir {
    pub fn create(root: &Path, manifest: Manifest) -> io::Result<Self> {
        std::fs::create_dir_all(root)?;
        Ok(OutputDir {
            root: root.to_path_buf(),
            manifest,
            files: BTreeMap::new(),
            timings: BTreeMap::new(),
        })
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> io::Result<()> {
        std::fs::write(self.root.join(name), bytes)?;
        self.files.insert(name.to_string(), sha256_hex(bytes));
        Ok(())
    }

    pub fn write_csv(&mut self, name: &str, csv: Csv) -> io::Result<()> {
        self.write(name, &csv.into_bytes())
    }

    /// JSON document with the manifest embedded under `"manifest"`.
    pub fn write_json<T: Serialize>(&mut self, name: &str, body: &T) -> io::Result<()> {
        #[derive(Serialize)]
        struct WithManifest<'a, T> {
            manifest: &'a Manifest,
            #[serde(flatten)]
            body: &'a T,
        }
        let doc = WithManifest {
            manifest: &self.manifest,
            body,
        };
        let mut text = serde_json::to_string_pretty(&doc).map_err(io::Error::other)?;
        text.push('\n');
        self.write(name, text.as_bytes())
    }

    pub fn record_time(&mut self, stage: &str, elapsed: Duration) {
        self.timings
            .insert(stage.to_string(), elapsed.as_secs_f64());
    }

    /// Writes `manifest.json` (output hashes) and `timings.json` (wall clock).
    pub fn finish(mut self) -> io::Result<()> {
        #[derive(Serialize)]
        struct Files<'a> {
            files: &'a BTreeMap<String, String>,
        }
        let files = std::mem::take(&mut self.files);
        self.write_json("manifest.json", &Files { files: &files })?;
        #[derive(Serialize)]
        struct Timings<'a> {
            command: &'a str,
            seconds: &'a BTreeMap<String, f64>,
        }
        let mut text = serde_json::to_string_pretty(&Timings {
            command: &self.manifest.command,
            seconds: &self.timings,
        })
        .map_err(io::Error::other)?;
        text.push('\n');
        std::fs::write(self.root.join("timings.json"), text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scientific_format() {
        assert_eq!(sci(1.0), "1.00000000e0");
        assert_eq!(sci(-0.000123456789), "-1.23456789e-4");
        assert_eq!(sci(138.6), "1.38600000e2");
    }

    #[test]
    fn known_digest() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }

    #[test]
    fn manifest_lists_outputs() {
        let dir = tempfile::tempdir().unwrap();
        let m = Manifest {
            tool: "beamhop",
            version: "0",
            command: "test".into(),
            config_sha256: "00".into(),
        };
        let mut out = OutputDir::create(dir.path(), m).unwrap();
        let mut csv = Csv::new(&["a", "b"]);
        csv.row(&["1".into(), sci(2.0)]);
        out.write_csv("t.csv", csv).unwrap();
        out.record_time("t", Duration::from_millis(5));
        out.finish().unwrap();
        let text = std::fs::read_to_string(dir.path().join("t.csv")).unwrap();
        assert_eq!(text, "a,b\n1,2.00000000e0\n");
        let manifest: serde_json::Value = serde_json::from_str(
            &std::fs::read_to_string(dir.path().join("manifest.json")).unwrap(),
        )
        .unwrap();
        assert_eq!(manifest["files"]["t.csv"], sha256_hex(text.as_bytes()));
        assert_eq!(manifest["manifest"]["config_sha256"], "00");
        assert!(dir.path().join("timings.json").exists());
    }
}
