//! TOML run configuration. Every key is optional and defaults to the
//! reference settings; command-line flags override file values.

use std::path::Path;

use anyhow::{Context, Result};
use dcoref_core::pipeline::PipelineConfig;

pub fn load(path: Option<&Path>) -> Result<PipelineConfig> {
    let Some(path) = path else {
        return Ok(PipelineConfig::default());
    };
    let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
    toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
}

pub fn to_toml(cfg: &PipelineConfig) -> String {
    toml::to_string(cfg).expect("config serializes to TOML")
}
