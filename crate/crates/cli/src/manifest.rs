//! Run manifest: the effective configuration, its hash, and campaign
//! metadata. The hash keys resume bookkeeping.

use crate::config::ExperimentConfig;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::Path;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub config_hash: String,
    pub seed: u64,
    pub mode: String,
    pub model: String,
    pub iterations: usize,
    pub ranks_s: usize,
    /// Test-quantity keys in configured order.
    pub quantities: Vec<String>,
    pub coverage: f64,
    pub tool_version: String,
    /// Wall-clock creation time (unix seconds); exempt from determinism.
    pub created_unix: u64,
    /// The effective configuration after CLI overrides.
    pub config: ExperimentConfig,
}

pub fn config_hash(config: &ExperimentConfig) -> String {
    let mut hasher = Sha256::new();
    hasher.update(config.canonical_json().as_bytes());
    let digest = hasher.finalize();
    let mut out = String::with_capacity(64);
    for b in digest {
        use std::fmt::Write as _;
        let _ = write!(out, "{b:02x}");
    }
    out
}

impl Manifest {
    pub fn new(config: &ExperimentConfig, quantities: Vec<String>) -> Self {
        Manifest {
            config_hash: config_hash(config),
            seed: config.seed,
            mode: match config.mode {
                crate::config::Mode::Prior => "prior".into(),
                crate::config::Mode::Posterior => "posterior".into(),
            },
            model: config.model.id().to_string(),
            iterations: config.iterations,
            ranks_s: config.ranks_s,
            quantities,
            coverage: config.coverage,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            created_unix: std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
            config: config.clone(),
        }
    }

    pub fn write(&self, dir: &Path) -> std::io::Result<()> {
        std::fs::write(
            dir.join("manifest.json"),
            serde_json::to_string_pretty(self).expect("manifest serializes"),
        )
    }

    pub fn read(dir: &Path) -> std::io::Result<Self> {
        let text = std::fs::read_to_string(dir.join("manifest.json"))?;
        serde_json::from_str(&text)
            .map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))
    }
}
