//! Network configuration as JSON, mirroring the in-memory fields.
//! Missing fields take the basic-setting defaults, so a variant file can
//! override a single knob (e.g. `{"trunk_filters": 32}`).

use std::path::Path;

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};

use dehaze_core::network::NetworkConfig;

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConfigFile {
    pub trunk_depth: usize,
    pub trunk_filters: usize,
    pub kernel_size: usize,
    pub airlight_depth: usize,
    pub airlight_filters: usize,
    pub trans_block_size: usize,
    pub concat_blocks: usize,
    pub init_std: f64,
}

impl Default for ConfigFile {
    fn default() -> Self {
        ConfigFile::from(&NetworkConfig::default())
    }
}

impl From<&NetworkConfig> for ConfigFile {
    fn from(c: &NetworkConfig) -> Self {
        ConfigFile {
            trunk_depth: c.trunk_depth,
            trunk_filters: c.trunk_filters,
            kernel_size: c.kernel_size,
            airlight_depth: c.airlight_depth,
            airlight_filters: c.airlight_filters,
            trans_block_size: c.trans_block_size,
            concat_blocks: c.concat_blocks,
            init_std: c.init_std,
        }
    }
}

impl From<ConfigFile> for NetworkConfig {
    fn from(c: ConfigFile) -> Self {
        NetworkConfig {
            trunk_depth: c.trunk_depth,
            trunk_filters: c.trunk_filters,
            kernel_size: c.kernel_size,
            airlight_depth: c.airlight_depth,
            airlight_filters: c.airlight_filters,
            trans_block_size: c.trans_block_size,
            concat_blocks: c.concat_blocks,
            init_std: c.init_std,
        }
    }
}

/// Load a config JSON, or the default configuration when `path` is None.
pub fn load_config(path: Option<&Path>) -> Result<NetworkConfig> {
    let config = match path {
        None => NetworkConfig::default(),
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .with_context(|| format!("reading config {}", p.display()))?;
            let file: ConfigFile = serde_json::from_str(&text)
                .with_context(|| format!("parsing config {}", p.display()))?;
            file.into()
        }
    };
    config.validate()?;
    Ok(config)
}
