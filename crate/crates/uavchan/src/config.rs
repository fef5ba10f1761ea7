//! Run configuration. Every field has a default; unknown keys are rejected.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use uavchan_core::airsim::{LinkBudget, SnrMapSpec};
use uavchan_core::citygen::OracleConfig;
use uavchan_core::genmodel::TrainConfig;
use uavchan_core::gpp::GppFitConfig;
use uavchan_core::metrics::{AngularSpec, GridSpec, OmniMode};

use crate::error::{io_err, Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Drives city generation, the train/test split, link generation in
    /// `generate` and `eval`, and the SNR map (it replaces `snr_map.seed`).
    pub seed: u64,
    /// Links drawn by `datagen`.
    pub n_links: usize,
    pub split_fraction: f64,
    pub oracle: OracleConfig,
    /// Defaults are the full-scale settings (10000 VAE epochs); override
    /// `train.vae.epochs` for quick runs.
    pub train: TrainConfig,
    pub gpp: GppFitConfig,
    pub grid: GridSpec,
    pub angular: AngularSpec,
    pub omni_mode: OmniMode,
    pub budget: LinkBudget,
    pub snr_map: SnrMapSpec,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 1,
            n_links: 20_000,
            split_fraction: 0.75,
            oracle: OracleConfig::default(),
            train: TrainConfig::default(),
            gpp: GppFitConfig::default(),
            grid: GridSpec::default(),
            angular: AngularSpec::default(),
            omni_mode: OmniMode::default(),
            budget: LinkBudget::default(),
            snr_map: SnrMapSpec::default(),
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str, origin: &Path) -> Result<Self> {
        serde_json::from_str(text).map_err(|source| Error::Json {
            path: origin.to_path_buf(),
            source,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path).map_err(io_err(path))?, path)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("config serializes");
        s.push('\n');
        s
    }
}
