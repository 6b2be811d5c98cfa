//! Reproducibility envelope shared by every CLI report: a schema version, a
//! timestamp (the only nondeterministic field), and the full run
//! configuration including input digests. Two runs with the same
//! configuration produce byte-identical reports apart from `generated_at`.

use crate::error::Result;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::path::Path;

pub const SCHEMA_VERSION: &str = "1";

/// Everything needed to replay a run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    pub subcommand: String,
    /// Flag name -> rendered value, sorted by name.
    pub flags: BTreeMap<String, String>,
    pub seed: Option<u64>,
    pub output: Option<String>,
    pub tool_version: String,
    /// Input label -> sha256 hex digest.
    pub input_digests: BTreeMap<String, String>,
}

impl RunConfig {
    pub fn new(subcommand: impl Into<String>) -> Self {
        Self {
            subcommand: subcommand.into(),
            flags: BTreeMap::new(),
            seed: None,
            output: None,
            tool_version: env!("CARGO_PKG_VERSION").into(),
            input_digests: BTreeMap::new(),
        }
    }

    pub fn flag(mut self, name: &str, value: impl ToString) -> Self {
        self.flags.insert(name.into(), value.to_string());
        self
    }

    pub fn opt_flag(mut self, name: &str, value: Option<impl ToString>) -> Self {
        if let Some(v) = value {
            self.flags.insert(name.into(), v.to_string());
        }
        self
    }

    pub fn seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    pub fn output(mut self, path: Option<&Path>) -> Self {
        self.output = path.map(|p| p.display().to_string());
        self
    }

    pub fn digest_file(mut self, label: &str, path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path)?;
        self.input_digests
            .insert(label.into(), sha256_hex(&bytes));
        Ok(self)
    }

    pub fn digest_bytes(mut self, label: &str, bytes: &[u8]) -> Self {
        self.input_digests.insert(label.into(), sha256_hex(bytes));
        self
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    let digest = hasher.finalize();
    let mut out = String::with_capacity(64);
    for b in digest {
        out.push_str(&format!("{b:02x}"));
    }
    out
}

/// A report payload wrapped with its reproducibility header.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Report<T> {
    pub schema_version: String,
    /// RFC 3339 UTC timestamp; the only field that varies between identical
    /// runs.
    pub generated_at: String,
    pub config: RunConfig,
    pub result: T,
}

impl<T: Serialize> Report<T> {
    pub fn new(config: RunConfig, result: T) -> Self {
        Self {
            schema_version: SCHEMA_VERSION.into(),
            generated_at: chrono::Utc::now().to_rfc3339(),
            config,
            result,
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("reports serialize");
        s.push('\n');
        s
    }

    pub fn write(&self, path: Option<&Path>) -> Result<()> {
        let json = self.to_json();
        match path {
            Some(p) => std::fs::write(p, json)?,
            None => print!("{json}"),
        }
        Ok(())
    }
}
