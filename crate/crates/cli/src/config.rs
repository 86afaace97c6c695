//! Run configuration: a flat-dotted-keys TOML file, every key overridable
//! by a command-line flag. Unknown keys are rejected.

use std::path::{Path, PathBuf};

use serde::Deserialize;

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub corpus: Option<PathBuf>,
    pub embeddings: Option<PathBuf>,
    pub demos: Option<PathBuf>,
    pub model: Option<PathBuf>,
    pub reports: Option<PathBuf>,
    pub template: Option<String>,
    pub seed: Option<u64>,
    pub prices: Option<PathBuf>,
    pub provider: ProviderConfig,
    pub llm: LlmConfig,
    pub boost: BoostToml,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProviderConfig {
    pub kind: Option<String>,
    pub url: Option<String>,
    pub dimension: Option<usize>,
    pub batch_size: Option<usize>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LlmConfig {
    pub kind: Option<String>,
    pub url: Option<String>,
    pub model: Option<String>,
    pub fixtures: Option<PathBuf>,
    pub max_in_flight: Option<usize>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BoostToml {
    pub max_depth: Option<usize>,
    pub eta: Option<f64>,
    pub num_rounds: Option<usize>,
    pub lambda: Option<f64>,
    pub gamma: Option<f64>,
    pub min_child_weight: Option<f64>,
    pub base_margin: Option<f64>,
    pub seed: Option<u64>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, String> {
        let raw = std::fs::read_to_string(path)
            .map_err(|e| format!("cannot read {}: {e}", path.display()))?;
        toml::from_str(&raw).map_err(|e| format!("{}: {e}", path.display()))
    }
}
