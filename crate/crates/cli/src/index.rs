//! `morphs.json`, the index a `morph` run leaves in its output directory.

use std::collections::HashSet;

use morphforge_core::protocol::Split;
use morphforge_core::{Error, MorphMethod, Result};
use serde::{Deserialize, Serialize};

pub const MORPH_INDEX: &str = "morphs.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MorphEntry {
    pub id: String,
    /// File name inside the morph directory.
    pub file: String,
    pub split: Split,
    pub a_id: String,
    pub a_img: String,
    pub b_id: String,
    pub b_img: String,
    pub sha256: String,
    /// Perceptual loss of the regenerated image, for generator methods.
    pub loss: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MorphIndex {
    /// Attack type label, e.g. `lma` or `regen`.
    pub attack: String,
    pub method: MorphMethod,
    pub alpha: f64,
    pub seed: u64,
    pub morphs: Vec<MorphEntry>,
}

impl MorphIndex {
    pub fn validate(&self) -> Result<()> {
        if self.attack.is_empty() || !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::Validation(
                "morph index has no attack label or a bad alpha".into(),
            ));
        }
        let mut ids = HashSet::new();
        for m in &self.morphs {
            if !ids.insert(m.id.as_str()) {
                return Err(Error::Validation(format!("morph `{}` listed twice", m.id)));
            }
            if m.a_id == m.b_id {
                return Err(Error::Validation(format!(
                    "morph `{}` has a single subject",
                    m.id
                )));
            }
            if m.file.contains('/') || m.file.contains('\\') || m.file.starts_with('.') {
                return Err(Error::Validation(format!(
                    "morph file `{}` escapes its directory",
                    m.file
                )));
            }
        }
        Ok(())
    }

    pub fn from_json(bytes: &[u8]) -> Result<Self> {
        let index: MorphIndex = serde_json::from_slice(bytes)?;
        index.validate()?;
        Ok(index)
    }

    pub fn in_split(&self, split: Split) -> impl Iterator<Item = &MorphEntry> {
        self.morphs.iter().filter(move |m| m.split == split)
    }
}
