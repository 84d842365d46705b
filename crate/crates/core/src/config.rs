//! Run configuration files.
//!
//! A config is TOML with dotted keys, one hyper-parameter per line:
//!
//! ```text
//! data.seed = 7
//! data.preset = "high"          # expands into data.quality.*
//! data.quality.miss_prob = 0.1  # explicit keys override the preset
//! model.d_q = 64
//! train.iterations = 1500
//! ablation.seeds = [1, 2, 3]
//! ```
//!
//! Unknown keys are rejected so typos do not silently fall back to defaults.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::synth::{DataConfig, QualityPreset};
use crate::train::{ModelConfig, TrainConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathsConfig {
    /// Directory holding the generated splits and vocabulary.
    pub data_dir: PathBuf,
}

impl Default for PathsConfig {
    fn default() -> Self {
        Self {
            data_dir: PathBuf::from("data"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AblationConfig {
    pub seeds: Vec<u64>,
    /// Also train the full model with every proposal regressed.
    pub include_unmasked_regression: bool,
}

impl Default for AblationConfig {
    fn default() -> Self {
        Self {
            seeds: vec![1, 2, 3],
            include_unmasked_regression: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub data: DataConfig,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub ablation: AblationConfig,
    pub paths: PathsConfig,
}

fn merge(base: &mut toml::Table, over: toml::Table) {
    for (k, v) in over {
        match (base.get_mut(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) => merge(b, o),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let mut table: toml::Table = text.parse().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        if let Some(toml::Value::Table(data)) = table.get_mut("data") {
            if let Some(preset) = data.remove("preset") {
                let name = preset
                    .as_str()
                    .ok_or_else(|| Error::Config("data.preset must be a string".into()))?;
                let preset: QualityPreset = name.parse()?;
                let mut quality = toml::Table::try_from(preset.config()).map_err(|e| Error::Config(e.to_string()))?;
                if let Some(toml::Value::Table(over)) = data.remove("quality") {
                    merge(&mut quality, over);
                }
                data.insert("quality".into(), toml::Value::Table(quality));
            }
        }
        let cfg: RunConfig = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.data.validate()?;
        self.train.validate()?;
        if [self.model.d_e, self.model.d_q, self.model.d_o].contains(&0) {
            return Err(Error::Config("model widths must be positive".into()));
        }
        if self.ablation.seeds.is_empty() {
            return Err(Error::Config("ablation.seeds must not be empty".into()));
        }
        Ok(())
    }

    /// Dotted-key TOML that loads back to an equal config.
    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}
