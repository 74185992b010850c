//! Text checkpoints: named row-major tensors plus the task config they were
//! trained under and its fingerprint.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::env::DockConfig;
use crate::error::CheckpointError;
use crate::policy::{Architecture, PolicyParams};
use crate::ppo::AblationConfig;

pub const CHECKPOINT_FORMAT: &str = "dock-policy-checkpoint/1";

/// Hex SHA-256 of the value's JSON serialization. Field order is fixed by the
/// type definitions and floats print in shortest round-trip form, so equal
/// values always hash equally.
pub fn config_fingerprint<T: Serialize>(value: &T) -> String {
    let bytes = serde_json::to_vec(value).expect("config serializes");
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub params: PolicyParams,
    /// Effective task config (ablation already applied).
    pub dock: DockConfig,
    pub ablation: AblationConfig,
    pub seed: u64,
    pub update: usize,
    /// Fingerprint of `dock`.
    pub env_fingerprint: String,
    /// Fingerprint of the full run config, when written by a run.
    pub run_fingerprint: Option<String>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TensorDoc {
    name: String,
    shape: [usize; 2],
    data: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CheckpointDoc {
    format: String,
    env_fingerprint: String,
    run_fingerprint: Option<String>,
    ablation: AblationConfig,
    seed: u64,
    update: usize,
    dock: DockConfig,
    arch: Architecture,
    tensors: Vec<TensorDoc>,
}

impl Checkpoint {
    pub fn new(
        params: PolicyParams,
        dock: DockConfig,
        ablation: AblationConfig,
        seed: u64,
        update: usize,
        run_fingerprint: Option<String>,
    ) -> Self {
        Self {
            env_fingerprint: config_fingerprint(&dock),
            params,
            dock,
            ablation,
            seed,
            update,
            run_fingerprint,
        }
    }

    pub fn to_json(&self) -> String {
        let doc = CheckpointDoc {
            format: CHECKPOINT_FORMAT.into(),
            env_fingerprint: self.env_fingerprint.clone(),
            run_fingerprint: self.run_fingerprint.clone(),
            ablation: self.ablation,
            seed: self.seed,
            update: self.update,
            dock: self.dock.clone(),
            arch: self.params.arch().clone(),
            tensors: self
                .params
                .layout
                .entries
                .iter()
                .map(|e| TensorDoc {
                    name: e.name.clone(),
                    shape: e.shape,
                    data: self.params.data[e.range()].to_vec(),
                })
                .collect(),
        };
        serde_json::to_string(&doc).expect("checkpoint serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, CheckpointError> {
        let doc: CheckpointDoc = serde_json::from_str(text).map_err(|e| CheckpointError::Parse(e.to_string()))?;
        if doc.format != CHECKPOINT_FORMAT {
            return Err(CheckpointError::Parse(format!(
                "unsupported format `{}` (expected `{CHECKPOINT_FORMAT}`)",
                doc.format
            )));
        }
        let recomputed = config_fingerprint(&doc.dock);
        if recomputed != doc.env_fingerprint {
            return Err(CheckpointError::Parse(format!(
                "stored fingerprint {} does not match its embedded config ({recomputed})",
                doc.env_fingerprint
            )));
        }
        let mut params = PolicyParams::zeros(doc.arch);
        if doc.tensors.len() != params.layout.entries.len() {
            return Err(CheckpointError::Parse(format!(
                "expected {} tensors, found {}",
                params.layout.entries.len(),
                doc.tensors.len()
            )));
        }
        for (t, e) in doc.tensors.iter().zip(params.layout.entries.clone()) {
            if t.name != e.name || t.shape != e.shape || t.data.len() != e.len() {
                return Err(CheckpointError::Parse(format!(
                    "tensor `{}` {:?} ({} values) does not match expected `{}` {:?}",
                    t.name,
                    t.shape,
                    t.data.len(),
                    e.name,
                    e.shape
                )));
            }
            if let Some(i) = t.data.iter().position(|v| !v.is_finite()) {
                return Err(CheckpointError::Parse(format!("tensor `{}` has a non-finite value at {i}", t.name)));
            }
            params.data[e.range()].copy_from_slice(&t.data);
        }
        Ok(Self {
            params,
            dock: doc.dock,
            ablation: doc.ablation,
            seed: doc.seed,
            update: doc.update,
            env_fingerprint: doc.env_fingerprint,
            run_fingerprint: doc.run_fingerprint,
        })
    }

    pub fn save(&self, path: &Path) -> Result<(), CheckpointError> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, CheckpointError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}
