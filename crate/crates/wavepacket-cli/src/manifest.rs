//! Run manifests: the configuration echo plus a content hash per output.
//!
//! Hashes follow git's object format with SHA-256: the digest of
//! `"blob <len>\0"` followed by the file bytes.

use std::path::Path;

use anyhow::{Context, Result};
use serde_json::json;
use sha2::{Digest, Sha256};

pub fn blob_hash(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(format!("blob {}\0", bytes.len()).as_bytes());
    h.update(bytes);
    hex::encode(h.finalize())
}

/// Writes `manifest.json` in `dir` listing `files` (names relative to
/// `dir`) with their hashes, in the given order.
pub fn write_manifest(dir: &Path, subcommand: &str, config_echo: &str, pass: bool, files: &[String]) -> Result<()> {
    let outputs = files
        .iter()
        .map(|f| {
            let bytes = std::fs::read(dir.join(f)).with_context(|| format!("hashing {f}"))?;
            Ok(json!({
                "file": f,
                "bytes": bytes.len(),
                "blob_sha256": blob_hash(&bytes),
            }))
        })
        .collect::<Result<Vec<_>>>()?;
    let doc = json!({
        "subcommand": subcommand,
        "pass": pass,
        "config": config_echo,
        "outputs": outputs,
    });
    let mut text = serde_json::to_string_pretty(&doc)?;
    text.push('\n');
    crate::experiments::write(&dir.join("manifest.json"), &text)
}
