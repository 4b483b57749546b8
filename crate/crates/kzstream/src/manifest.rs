//! Run manifests: everything needed to reproduce a run, and checksums of
//! what it produced.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// Git-style content hash: sha256 of "blob <len>\0" followed by the bytes.
pub fn content_hash(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(format!("blob {}\0", bytes.len()).as_bytes());
    h.update(bytes);
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseRecord {
    pub name: String,
    pub peak_words: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub format: String,
    pub command: String,
    pub seeds: BTreeMap<String, u64>,
    pub config: serde_json::Value,
    pub input_hash: Option<String>,
    pub word_bits: u32,
    pub phases: Vec<PhaseRecord>,
    pub outputs: BTreeMap<String, String>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub summary: BTreeMap<String, f64>,
}

impl RunManifest {
    pub fn new(command: &str, config: serde_json::Value) -> Self {
        RunManifest {
            format: "kzstream-manifest v1".into(),
            command: command.into(),
            seeds: BTreeMap::new(),
            config,
            input_hash: None,
            word_bits: 0,
            phases: Vec::new(),
            outputs: BTreeMap::new(),
            summary: BTreeMap::new(),
        }
    }

    pub fn record_output(&mut self, name: &str, bytes: &[u8]) {
        self.outputs.insert(name.into(), content_hash(bytes));
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes") + "\n"
    }
}
