//! JSON checkpoints holding the resolved config and both networks.
//!
//! Layout (version 1):
//!
//! ```text
//! {
//!   "format": "cer-checkpoint", "version": 1,
//!   "config": { ...training config... }, "config_hash": "<16 hex>",
//!   "seed": <u64>, "step": <optimizer steps>,
//!   "predictor": { "config": {...}, "dimensions": ["arousal", ...],
//!                  "network": { "layers": [ {in_dim, out_dim, activation,
//!                  trainable, weights (row-major out x in), bias,
//!                  adam_m, adam_v}, ... ] } },
//!   "acn": { "arousal": {"config": {...}, "network": {...}} | null,
//!            "valence": ... }
//! }
//! ```

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::annotations::{Dimension, PerDimension};
use crate::consensus::{Acn, AcnConfig};
use crate::error::{Error, Result};
use crate::nn::{Network, NetworkState};
use crate::predictor::{Predictor, PredictorConfig};
use crate::trainer::{ConsensusModel, TrainConfig};

pub const CHECKPOINT_FORMAT: &str = "cer-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PredictorState {
    pub config: PredictorConfig,
    pub dimensions: Vec<Dimension>,
    pub network: NetworkState,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AcnState {
    pub config: AcnConfig,
    pub network: NetworkState,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub config: TrainConfig,
    pub config_hash: String,
    /// Root seed of the run; also inside `config`.
    pub seed: u64,
    /// Optimizer steps taken; Adam moments are stored per layer.
    pub step: u64,
    pub predictor: PredictorState,
    pub acn: PerDimension<AcnState>,
}

impl Checkpoint {
    pub fn capture(model: &ConsensusModel, config: &TrainConfig, step: u64) -> Self {
        let p = &model.predictor;
        Self {
            format: CHECKPOINT_FORMAT.into(),
            version: CHECKPOINT_VERSION,
            config: config.clone(),
            config_hash: config.hash(),
            seed: config.seed,
            step,
            predictor: PredictorState {
                config: p.config().clone(),
                dimensions: p.dimensions().to_vec(),
                network: p.net().to_state(),
            },
            acn: model.acns.map(|_, a| AcnState {
                config: a.config().clone(),
                network: a.net().to_state(),
            }),
        }
    }

    pub fn restore(&self) -> Result<ConsensusModel> {
        let predictor = Predictor::from_network(
            self.predictor.config.clone(),
            self.predictor.dimensions.clone(),
            Network::from_state(&self.predictor.network)?,
        )?;
        let acns = self
            .acn
            .try_map(|_, s| Acn::from_network(s.config.clone(), Network::from_state(&s.network)?))?;
        Ok(ConsensusModel { predictor, acns })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, serde_json::to_string(self)?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let value: serde_json::Value = serde_json::from_str(&text)?;
        if value.get("format").and_then(|f| f.as_str()) != Some(CHECKPOINT_FORMAT) {
            return Err(Error::Structure {
                path: path.into(),
                message: "not a checkpoint file".into(),
            });
        }
        let ckpt: Self = serde_json::from_value(value)?;
        if ckpt.version != CHECKPOINT_VERSION {
            return Err(Error::Structure {
                path: path.into(),
                message: format!("unsupported checkpoint version {}", ckpt.version),
            });
        }
        Ok(ckpt)
    }
}
