//! Model files: a versioned, self-describing JSON container.
//!
//! Floats are written in their shortest round-trip form and parsed back
//! exactly, so save → load → save reproduces the file byte for byte.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Result, RrlError};
use crate::model::{ModelConfig, RrlModel};
use crate::numerics::RNG_ALGORITHM;
use crate::trainer::TrainConfig;

pub const FORMAT_NAME: &str = "rrl-model";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub format: String,
    pub version: u32,
    /// Generator behind `seed`, so a run can be replayed.
    pub rng: String,
    pub seed: u64,
    pub model_config: ModelConfig,
    pub train_config: TrainConfig,
    /// Epoch whose snapshot this is.
    pub best_epoch: usize,
    pub model: RrlModel,
}

impl ModelFile {
    pub fn new(model: RrlModel, model_config: ModelConfig, train_config: TrainConfig, best_epoch: usize) -> Self {
        Self {
            format: FORMAT_NAME.into(),
            version: FORMAT_VERSION,
            rng: RNG_ALGORITHM.into(),
            seed: train_config.seed,
            model_config,
            train_config,
            best_epoch,
            model,
        }
    }

    pub fn to_text(&self) -> Result<String> {
        let mut text = serde_json::to_string_pretty(self)
            .map_err(|e| RrlError::ModelFile(format!("cannot serialize model: {e}")))?;
        text.push('\n');
        Ok(text)
    }

    /// Parses a model file, checking the format tag and version before
    /// anything else.
    pub fn from_text(text: &str) -> Result<Self> {
        let value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| RrlError::ModelFile(format!("not a JSON document: {e}")))?;
        let format = value.get("format").and_then(|v| v.as_str());
        if format != Some(FORMAT_NAME) {
            return Err(RrlError::ModelFile(format!(
                "not an {FORMAT_NAME} file (format tag {format:?})"
            )));
        }
        let version = value.get("version").and_then(|v| v.as_u64());
        if version != Some(u64::from(FORMAT_VERSION)) {
            return Err(RrlError::ModelFile(format!(
                "unsupported model file version {version:?}; this build reads version {FORMAT_VERSION}"
            )));
        }
        let file: ModelFile =
            serde_json::from_value(value).map_err(|e| RrlError::ModelFile(format!("malformed model file: {e}")))?;
        file.model.validate()?;
        Ok(file)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_text()?).map_err(|e| RrlError::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| RrlError::io(path, e))?;
        Self::from_text(&text)
    }
}
