//! Declarative TOML configuration. Command-line flags always win over file
//! values; unknown keys are rejected.

use std::path::Path;

use anyhow::{Context, Result};
use serde::Deserialize;

#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub seed: Option<u64>,
    pub jobs: Option<usize>,
    #[serde(default)]
    pub mfcc: MfccSection,
    #[serde(default)]
    pub mask: MaskSection,
    #[serde(default)]
    pub score: ScoreSection,
}

#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MfccSection {
    pub sample_rate: Option<u32>,
    pub frame_length_ms: Option<f64>,
    pub frame_shift_ms: Option<f64>,
    pub num_ceps: Option<usize>,
    pub num_mel_filters: Option<usize>,
    pub fft_size: Option<usize>,
    pub preemphasis: Option<f64>,
    pub mel_low_hz: Option<f64>,
    pub mel_high_hz: Option<f64>,
    pub log_floor: Option<f64>,
}

#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaskSection {
    pub method: Option<String>,
    pub ratio: Option<f64>,
    pub fill: Option<String>,
    pub spec_freq_width: Option<usize>,
    pub spec_freq_masks: Option<usize>,
    pub spec_time_width: Option<usize>,
    pub spec_time_masks: Option<usize>,
}

#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScoreSection {
    pub graphemes: Option<bool>,
    pub detail: Option<bool>,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        match path {
            None => Ok(FileConfig::default()),
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .with_context(|| format!("reading config {}", path.display()))?;
                toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
            }
        }
    }
}

/// Seed precedence: flag, config file, `REDMASK_SEED`, 0.
pub fn resolve_seed(flag: Option<u64>, config: &FileConfig) -> Result<u64> {
    if let Some(seed) = flag {
        return Ok(seed);
    }
    if let Some(seed) = config.seed {
        return Ok(seed);
    }
    match std::env::var("REDMASK_SEED") {
        Ok(value) => value
            .parse()
            .with_context(|| format!("REDMASK_SEED `{value}` is not a 64-bit seed")),
        Err(_) => Ok(0),
    }
}
