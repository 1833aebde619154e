//! CSV and JSON writers that embed run metadata.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::PathBuf;

use anyhow::{Context, Result};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone)]
pub struct Meta {
    pub subcommand: String,
    pub seed: u64,
    pub config: Value,
    pub input_hash: String,
}

/// SHA-256 over a git-style blob header followed by the content.
pub fn blob_hash(content: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(format!("blob {}\0", content.len()).as_bytes());
    h.update(content);
    hex::encode(h.finalize())
}

impl Meta {
    pub fn new(subcommand: &str, seed: u64, resolved: BTreeMap<String, Value>) -> Self {
        let config = Value::Object(resolved.into_iter().collect());
        let canonical = serde_json::to_vec(&json!({ "subcommand": subcommand, "config": config })).expect("json");
        Self { subcommand: subcommand.to_string(), seed, config, input_hash: blob_hash(&canonical) }
    }

    pub fn to_json(&self) -> Value {
        json!({
            "version": VERSION,
            "subcommand": self.subcommand,
            "seed": self.seed,
            "config": self.config,
            "input_hash": self.input_hash,
        })
    }

    fn csv_header(&self) -> String {
        format!(
            "# ising-lab {VERSION}\n# subcommand={}\n# seed={}\n# config={}\n# input_hash={}\n",
            self.subcommand, self.seed, self.config, self.input_hash
        )
    }
}

/// Writes artefacts into a directory, or to stdout when none is given.
pub struct Sink {
    pub out: Option<PathBuf>,
    pub meta: Meta,
}

impl Sink {
    fn emit(&self, name: &str, content: &str) -> Result<()> {
        match &self.out {
            Some(dir) => {
                std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
                let path = dir.join(name);
                std::fs::write(&path, content).with_context(|| format!("writing {}", path.display()))?;
            }
            None => {
                let mut stdout = std::io::stdout().lock();
                stdout.write_all(content.as_bytes())?;
                stdout.write_all(b"\n")?;
            }
        }
        Ok(())
    }

    pub fn csv(&self, name: &str, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
        let mut text = self.meta.csv_header();
        text.push_str(&header.join(","));
        text.push('\n');
        for row in rows {
            text.push_str(&row.join(","));
            text.push('\n');
        }
        self.emit(name, &text)
    }

    pub fn json(&self, name: &str, result: Value) -> Result<()> {
        let doc = json!({ "meta": self.meta.to_json(), "result": result });
        self.emit(name, &(serde_json::to_string_pretty(&doc)? + "\n"))
    }

    /// Raw text; the metadata goes to a `<name>.meta.json` sidecar when
    /// writing to a directory.
    pub fn text(&self, name: &str, content: &str) -> Result<()> {
        if self.out.is_some() {
            let doc = json!({ "meta": self.meta.to_json(), "content_hash": blob_hash(content.as_bytes()) });
            self.emit(&format!("{name}.meta.json"), &(serde_json::to_string_pretty(&doc)? + "\n"))?;
        }
        self.emit(name, content.trim_end_matches('\n'))
    }
}

pub fn num(x: f64) -> String {
    if x.is_nan() {
        String::new()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{x}")
    }
}

pub fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

pub fn json_num(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else {
        Value::Null
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn blob_hash_matches_git() {
        // git hash-object uses SHA-1; the header layout is what matters here
        assert_eq!(blob_hash(b"").len(), 64);
        assert_ne!(blob_hash(b"a"), blob_hash(b"b"));
        assert_eq!(blob_hash(b"abc"), blob_hash(b"abc"));
    }

    #[test]
    fn number_formatting() {
        assert_eq!(num(0.5), "0.5");
        assert_eq!(num(f64::NAN), "");
        assert_eq!(num(f64::NEG_INFINITY), "-inf");
        assert_eq!(opt(None), "");
    }
}
