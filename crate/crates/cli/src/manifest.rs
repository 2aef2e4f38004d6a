use std::collections::BTreeMap;

use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};
use time::format_description::well_known::Rfc3339;
use time::OffsetDateTime;

/// Provenance record embedded in every output file.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: String,
    /// Analysis parameters, excluding output paths.
    pub params: Value,
    /// SHA-256 of each input file and of the canonical parameter JSON.
    pub config_hashes: BTreeMap<String, String>,
    pub seed: Option<u64>,
    pub version: String,
    pub timestamp: String,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

impl RunManifest {
    pub fn new(command: &str, params: Value, seed: Option<u64>) -> Self {
        let mut config_hashes = BTreeMap::new();
        config_hashes.insert("params".to_string(), sha256_hex(params.to_string().as_bytes()));
        Self {
            command: command.to_string(),
            params,
            config_hashes,
            seed,
            version: env!("CARGO_PKG_VERSION").to_string(),
            timestamp: OffsetDateTime::now_utc()
                .format(&Rfc3339)
                .unwrap_or_else(|_| "unknown".into()),
        }
    }

    pub fn with_input(mut self, name: &str, contents: &[u8]) -> Self {
        self.config_hashes.insert(name.to_string(), sha256_hex(contents));
        self
    }

    /// `# key: value` lines for CSV files and gnuplot scripts.
    pub fn comment_block(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("# command: {}\n", self.command));
        out.push_str(&format!("# params: {}\n", self.params));
        for (k, v) in &self.config_hashes {
            out.push_str(&format!("# config_hash.{k}: {v}\n"));
        }
        let seed = self.seed.map_or("-".to_string(), |s| s.to_string());
        out.push_str(&format!("# seed: {seed}\n"));
        out.push_str(&format!("# version: {}\n", self.version));
        out.push_str(&format!("# timestamp: {}\n", self.timestamp));
        out
    }
}
