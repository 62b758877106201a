use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Reproducibility block written at the top of manifests and reports.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub tool_version: String,
    /// SHA-256 of the canonical JSON form of the settings that affect output.
    pub config_hash: String,
    pub seed: Option<u64>,
}

impl Default for Provenance {
    fn default() -> Self {
        Self {
            tool_version: TOOL_VERSION.to_string(),
            config_hash: String::new(),
            seed: None,
        }
    }
}

impl Provenance {
    pub fn for_config<T: Serialize>(cfg: &T, seed: Option<u64>) -> Self {
        Self {
            tool_version: TOOL_VERSION.to_string(),
            config_hash: config_hash(cfg),
            seed,
        }
    }
}

pub fn config_hash<T: Serialize>(cfg: &T) -> String {
    // serde_json::Value keeps object keys sorted, which makes the hash
    // independent of struct field order.
    let canonical = serde_json::to_value(cfg)
        .and_then(|v| serde_json::to_vec(&v))
        .expect("configuration serializes to JSON");
    Sha256::digest(&canonical)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}
