//! Batch manifest: a JSON array of pair records.
//!
//! ```json
//! [
//!   {"pair_id": "p0001", "embedding_a": "emb/a.epc", "embedding_b": "emb/b.epc",
//!    "similarity": 3.2, "group": 3.0, "generation_seed": 1234}
//! ]
//! ```
//!
//! `group` may be omitted; when present it must equal the 0.5-wide bin
//! lower edge of `similarity`. Relative paths resolve against the manifest's
//! directory. `generation_seed` is carried through for provenance only.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Lower edge of the 0.5-wide similarity bin containing `similarity`.
pub fn similarity_group(similarity: f64) -> f64 {
    (similarity / 0.5).floor() * 0.5
}

fn is_safe_id(id: &str) -> bool {
    !id.is_empty()
        && id != "."
        && id != ".."
        && id
            .bytes()
            .all(|b| b.is_ascii_alphanumeric() || matches!(b, b'.' | b'_' | b'-'))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub pair_id: String,
    pub embedding_a: PathBuf,
    pub embedding_b: PathBuf,
    pub similarity: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub group: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generation_seed: Option<u64>,
}

impl ManifestEntry {
    pub fn group(&self) -> f64 {
        self.group
            .unwrap_or_else(|| similarity_group(self.similarity))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairManifest {
    entries: Vec<ManifestEntry>,
}

impl PairManifest {
    /// Validates entries; relative embedding paths are joined onto `base_dir`.
    pub fn new(entries: Vec<ManifestEntry>, base_dir: &Path) -> Result<Self> {
        let mut seen = HashSet::new();
        let mut resolved = Vec::with_capacity(entries.len());
        for mut e in entries {
            if !is_safe_id(&e.pair_id) {
                return Err(Error::Invalid(format!(
                    "pair_id {:?} must be non-empty ASCII letters, digits, '.', '_' or '-' (it names an output directory)",
                    e.pair_id
                )));
            }
            if !seen.insert(e.pair_id.clone()) {
                return Err(Error::Invalid(format!("duplicate pair_id {:?}", e.pair_id)));
            }
            if !(0.0..=5.0).contains(&e.similarity) {
                return Err(Error::Invalid(format!(
                    "pair {}: similarity {} outside [0, 5]",
                    e.pair_id, e.similarity
                )));
            }
            let expected = similarity_group(e.similarity);
            match e.group {
                Some(g) if g != expected => {
                    return Err(Error::Invalid(format!(
                        "pair {}: group {g} does not match similarity {} (expected {expected})",
                        e.pair_id, e.similarity
                    )))
                }
                _ => e.group = Some(expected),
            }
            for p in [&mut e.embedding_a, &mut e.embedding_b] {
                if p.is_relative() {
                    *p = base_dir.join(&*p);
                }
                if !p.is_file() {
                    return Err(Error::Invalid(format!(
                        "pair {}: embedding file {} does not exist",
                        e.pair_id,
                        p.display()
                    )));
                }
            }
            resolved.push(e);
        }
        Ok(Self { entries: resolved })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let entries: Vec<ManifestEntry> = serde_json::from_str(&text)?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        Self::new(entries, base)
    }

    pub fn save(entries: &[ManifestEntry], path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(entries)?;
        std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn entries(&self) -> &[ManifestEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, pair_id: &str) -> Option<&ManifestEntry> {
        self.entries.iter().find(|e| e.pair_id == pair_id)
    }
}
