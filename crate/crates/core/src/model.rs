//! Model variants, trained state, and the checkpoint container.
//!
//! A checkpoint is a single JSON document:
//!
//! ```text
//! {
//!   "format": "rwr-gae-checkpoint",
//!   "version": 1,
//!   "config": { ...TrainConfig... },
//!   "n": <nodes>, "feature_dim": <h>,
//!   "embedder": {"gcn": {"params": {...}, "optim": {...}}} | {"free": {"embedding": ..., "optim": ...}},
//!   "context": {"c": <matrix>} | null,
//!   "context_optim": <adam state> | null,
//!   "rng": {"walks": <rng state>, "negatives": ..., "noise": ...},
//!   "epochs_completed": <count>,
//!   "embedding": <n × d matrix of final embeddings, μ for variational models>,
//!   "node_ids": [<external id of each row>]
//! }
//! ```
//!
//! Matrices serialize as `{"rows": r, "cols": c, "data": [row-major values]}`. Floats are
//! written in shortest round-trip form, so loading restores every value bit-exactly.

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gcn_autoencoder::{EncoderOptim, EncoderParams};
use crate::numkit::{AdamState, DenseMatrix, RngState};
use crate::skipgram::ContextTable;
use crate::trainer::TrainConfig;

pub const CHECKPOINT_FORMAT: &str = "rwr-gae-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Gae,
    Vgae,
    RwrGae,
    RwrVgae,
    /// Skip-gram over walks with a free embedding table (DeepWalk).
    WalksOnly,
}

impl ModelKind {
    pub const ALL: [ModelKind; 5] = [
        ModelKind::Gae,
        ModelKind::Vgae,
        ModelKind::RwrGae,
        ModelKind::RwrVgae,
        ModelKind::WalksOnly,
    ];

    pub fn is_variational(self) -> bool {
        matches!(self, ModelKind::Vgae | ModelKind::RwrVgae)
    }

    pub fn uses_walks(self) -> bool {
        matches!(
            self,
            ModelKind::RwrGae | ModelKind::RwrVgae | ModelKind::WalksOnly
        )
    }

    pub fn uses_autoencoder(self) -> bool {
        !matches!(self, ModelKind::WalksOnly)
    }

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Gae => "gae",
            ModelKind::Vgae => "vgae",
            ModelKind::RwrGae => "rwr-gae",
            ModelKind::RwrVgae => "rwr-vgae",
            ModelKind::WalksOnly => "walks-only",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.to_ascii_lowercase().replace('_', "-");
        ModelKind::ALL
            .into_iter()
            .find(|m| m.name() == key || (key == "deepwalk" && *m == ModelKind::WalksOnly))
            .ok_or_else(|| Error::config(format!("unknown model {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Embedder {
    Gcn {
        params: EncoderParams,
        optim: EncoderOptim,
    },
    Free {
        embedding: DenseMatrix,
        optim: AdamState,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RngStates {
    pub walks: RngState,
    pub negatives: RngState,
    pub noise: RngState,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelState {
    pub config: TrainConfig,
    pub n: usize,
    pub feature_dim: usize,
    pub embedder: Embedder,
    pub context: Option<ContextTable>,
    pub context_optim: Option<AdamState>,
    pub rng: RngStates,
    pub epochs_completed: usize,
    /// Final node embeddings (μ for variational encoders).
    pub embedding: DenseMatrix,
    /// External node identifiers in row order; empty when the dataset had none.
    #[serde(default)]
    pub node_ids: Vec<String>,
}

#[derive(Serialize)]
struct CheckpointFile<'a> {
    format: &'a str,
    version: u32,
    #[serde(flatten)]
    state: &'a ModelState,
}

#[derive(Deserialize)]
struct CheckpointHeader {
    format: String,
    version: u32,
}

impl ModelState {
    pub fn to_json(&self) -> String {
        let file = CheckpointFile {
            format: CHECKPOINT_FORMAT,
            version: CHECKPOINT_VERSION,
            state: self,
        };
        serde_json::to_string(&file).expect("checkpoint serializes")
    }

    pub fn from_json(text: &str, path: &Path) -> Result<Self> {
        let json_err = |source| Error::Json {
            path: path.into(),
            source,
        };
        let header: CheckpointHeader = serde_json::from_str(text).map_err(json_err)?;
        if header.format != CHECKPOINT_FORMAT || header.version != CHECKPOINT_VERSION {
            return Err(Error::config(format!(
                "{}: unsupported checkpoint {} v{}",
                path.display(),
                header.format,
                header.version
            )));
        }
        serde_json::from_str(text).map_err(json_err)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json() + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text, path)
    }
}
