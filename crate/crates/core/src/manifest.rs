//! Run provenance. A manifest pins everything a run depends on (seed,
//! configuration digest, tool version), which together with the pinned RNG
//! makes every artifact replayable byte for byte.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

/// FNV-1a 64-bit hash; used to fingerprint configurations and manifests.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x100_0000_01b3);
    }
    h
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub master_seed: u64,
    /// Digest of the canonical serialized configuration.
    pub config_hash: u64,
    pub subcommand: String,
    /// Informational only; excluded from [`RunManifest::hash`] so reruns of
    /// the same manifest produce identical artifacts.
    pub timestamp: String,
    pub approximation_notes: Vec<String>,
}

impl RunManifest {
    pub fn new(tool_version: &str, master_seed: u64, config_hash: u64, subcommand: &str) -> Self {
        RunManifest {
            tool_version: String::from(tool_version),
            master_seed,
            config_hash,
            subcommand: String::from(subcommand),
            timestamp: String::new(),
            approximation_notes: Vec::new(),
        }
    }

    pub fn with_note(mut self, note: &str) -> Self {
        self.approximation_notes.push(String::from(note));
        self
    }

    /// Digest over every field that determines the run output. The
    /// timestamp is deliberately left out.
    pub fn hash(&self) -> u64 {
        let mut buf = String::new();
        buf.push_str(&self.tool_version);
        buf.push('\x1f');
        buf.push_str(&format!("{:016x}", self.master_seed));
        buf.push('\x1f');
        buf.push_str(&format!("{:016x}", self.config_hash));
        buf.push('\x1f');
        buf.push_str(&self.subcommand);
        for note in &self.approximation_notes {
            buf.push('\x1f');
            buf.push_str(note);
        }
        fnv1a64(buf.as_bytes())
    }

    pub fn hash_hex(&self) -> String {
        format!("{:016x}", self.hash())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fnv_known_values() {
        // Reference vectors for FNV-1a 64.
        assert_eq!(fnv1a64(b""), 0xcbf29ce484222325);
        assert_eq!(fnv1a64(b"a"), 0xaf63dc4c8601ec8c);
        assert_eq!(fnv1a64(b"foobar"), 0x85944171f73967e8);
    }

    #[test]
    fn hash_ignores_timestamp() {
        let mut m = RunManifest::new("0.1.0", 42, 7, "sample");
        let h = m.hash();
        m.timestamp = String::from("2001-01-01T00:00:00Z");
        assert_eq!(m.hash(), h);
        let n = m.clone().with_note("x");
        assert_ne!(n.hash(), h);
    }
}
