use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::write_file;
use crate::error::{Error, Result};
use crate::gan::GanModel;

pub const CHECKPOINT_VERSION: u32 = 1;

/// A trained model with the provenance needed to reuse it: format version,
/// hash of the configuration that produced it, and the class split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub version: u32,
    pub config_hash: String,
    pub seen: Vec<usize>,
    pub unseen: Vec<usize>,
    pub model: GanModel,
}

/// Hex SHA-256 of a configuration's canonical text.
pub fn config_hash(canonical: &str) -> String {
    hex::encode(Sha256::digest(canonical.as_bytes()))
}

impl Checkpoint {
    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string(self).map_err(|e| Error::Validation(format!("checkpoint encoding: {e}")))?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str, origin: &Path) -> Result<Self> {
        let cp: Checkpoint = serde_json::from_str(text).map_err(|e| Error::parse(origin, e.line(), e.to_string()))?;
        if cp.version != CHECKPOINT_VERSION {
            return Err(Error::Validation(format!(
                "{}: checkpoint version {} is not supported (expected {CHECKPOINT_VERSION})",
                origin.display(),
                cp.version
            )));
        }
        cp.model.validate()?;
        Ok(cp)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_file(path, self.to_json()?.as_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text, path)
    }
}
