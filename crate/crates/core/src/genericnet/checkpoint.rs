use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{GenericModel, ModelConfig};
use crate::{Error, Result};

const FORMAT: &str = "weakdyn-generic-model";

/// JSON container for a model: architecture plus the flat parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub config: ModelConfig,
    pub params: Vec<f64>,
}

impl Checkpoint {
    pub fn of(model: &GenericModel) -> Self {
        Self { format: FORMAT.into(), version: 1, config: model.config().clone(), params: model.params().to_vec() }
    }

    pub fn into_model(self) -> Result<GenericModel> {
        if self.format != FORMAT || self.version != 1 {
            return Err(Error::Parse(format!("unsupported checkpoint {} v{}", self.format, self.version)));
        }
        GenericModel::from_params(self.config, self.params)
    }
}

pub fn save_checkpoint(model: &GenericModel, path: &Path) -> Result<()> {
    let text = serde_json::to_string(&Checkpoint::of(model)).map_err(|e| Error::Parse(e.to_string()))?;
    std::fs::write(path, text)?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<GenericModel> {
    let text = std::fs::read_to_string(path)?;
    let ck: Checkpoint = serde_json::from_str(&text).map_err(|e| Error::Parse(e.to_string()))?;
    ck.into_model()
}
