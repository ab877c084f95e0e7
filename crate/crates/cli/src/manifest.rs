use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Ok,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Item {
    pub id: String,
    pub status: Status,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

/// Provenance record of one command run. Contains no timestamps, so
/// identical inputs give a byte-identical manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub config_hash: String,
    /// Model role -> fingerprint.
    pub models: BTreeMap<String, String>,
    pub settings: BTreeMap<String, serde_json::Value>,
    pub succeeded: usize,
    pub failed: usize,
    pub items: Vec<Item>,
}

impl Manifest {
    pub fn new(command: &str, config_hash: &str) -> Self {
        Self {
            command: command.into(),
            config_hash: config_hash.into(),
            models: BTreeMap::new(),
            settings: BTreeMap::new(),
            succeeded: 0,
            failed: 0,
            items: Vec::new(),
        }
    }

    pub fn ok(&mut self, id: impl Into<String>) {
        self.succeeded += 1;
        self.items.push(Item {
            id: id.into(),
            status: Status::Ok,
            detail: None,
        });
    }

    pub fn fail(&mut self, id: impl Into<String>, detail: impl ToString) {
        self.failed += 1;
        self.items.push(Item {
            id: id.into(),
            status: Status::Failed,
            detail: Some(detail.to_string()),
        });
    }

    pub fn setting(&mut self, key: &str, value: impl Serialize) {
        self.settings
            .insert(key.into(), serde_json::to_value(value).expect("setting serializes"));
    }

    pub fn failures(&self) -> impl Iterator<Item = &Item> {
        self.items.iter().filter(|i| i.status == Status::Failed)
    }

    /// Writes `<out>/manifests/<command>.json`.
    pub fn write(&self, out: &Path) -> Result<()> {
        let dir = out.join("manifests");
        std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
        let path = dir.join(format!("{}.json", self.command));
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        std::fs::write(&path, text).with_context(|| format!("writing {}", path.display()))
    }

    pub fn read(out: &Path, command: &str) -> Result<Self> {
        let path = out.join("manifests").join(format!("{command}.json"));
        let text = std::fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
        Ok(serde_json::from_str(&text)?)
    }
}
