//! Run manifests.
//!
//! The deterministic part (subcommand, resolved parameters, seed, tool
//! version) is embedded in JSON output. The sidecar written next to an
//! output file adds what legitimately differs between identical runs
//! (timestamps, worker count) and the SHA-256 digest of the data file.

use std::time::SystemTime;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputDigest {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub subcommand: String,
    pub parameters: Value,
    pub master_seed: Option<u64>,
    pub tool_version: String,
    pub started_at: String,
    pub finished_at: String,
    pub workers: Option<usize>,
    pub outputs: Vec<OutputDigest>,
}

impl RunManifest {
    pub fn start(subcommand: &str, parameters: Value, master_seed: Option<u64>, workers: Option<usize>) -> Self {
        Self {
            subcommand: subcommand.to_string(),
            parameters,
            master_seed,
            tool_version: TOOL_VERSION.to_string(),
            started_at: timestamp(),
            finished_at: String::new(),
            workers,
            outputs: Vec::new(),
        }
    }

    /// The fields that identify the computation, excluding run metadata.
    pub fn deterministic(&self) -> Value {
        serde_json::json!({
            "subcommand": self.subcommand,
            "parameters": self.parameters,
            "master_seed": self.master_seed,
            "tool_version": self.tool_version,
        })
    }

    pub fn finish(&mut self, outputs: Vec<OutputDigest>) {
        self.finished_at = timestamp();
        self.outputs = outputs;
    }
}

fn timestamp() -> String {
    humantime::format_rfc3339_millis(SystemTime::now()).to_string()
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}
