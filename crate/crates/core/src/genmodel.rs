//! The composed generator `x = g(u, z)` with `z = [z_state, z_nlos, z_out]`.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::domain::{Dataset, LinkCondition, LinkState, PathSet};
use crate::error::{check_len, Error, Result};
use crate::linkstate::{sample_state, train_link_state, LinkStateConfig, LinkStateModel};
use crate::numerics::SeededRng;
use crate::pathcodec::{
    assemble_full_pathset, decode_nlos, fit_codec_scalers, CodecScalers, DEFAULT_ABSENT_EPS, Y_DIM,
};
use crate::pathvae::{train_vae, VaeConfig, VaeModel, LATENT_DIM};

/// Model file format understood by this version.
pub const FORMAT_VERSION: u32 = 1;

/// Randomness consumed by one call of [`GenerativeModel::generate_link`].
#[derive(Debug, Clone, PartialEq)]
pub struct LatentDraw {
    pub z_state: f64,
    pub z_nlos: [f64; LATENT_DIM],
    pub z_out: [f64; Y_DIM],
}

impl LatentDraw {
    pub fn sample(rng: &mut SeededRng) -> Self {
        let z_state = rng.uniform();
        let mut z_nlos = [0.0; LATENT_DIM];
        let mut z_out = [0.0; Y_DIM];
        rng.fill_normal(&mut z_nlos);
        rng.fill_normal(&mut z_out);
        LatentDraw {
            z_state,
            z_nlos,
            z_out,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerativeModel {
    pub format_version: u32,
    pub env_id: String,
    pub carrier_hz: f64,
    pub absent_eps: f64,
    pub link_state: LinkStateModel,
    pub vae: VaeModel,
    pub codec: CodecScalers,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub link_state: LinkStateConfig,
    pub vae: VaeConfig,
    pub absent_eps: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            link_state: LinkStateConfig::default(),
            vae: VaeConfig::default(),
            absent_eps: DEFAULT_ABSENT_EPS,
        }
    }
}

/// A trained model with both training curves.
#[derive(Debug, Clone)]
pub struct TrainedModel {
    pub model: GenerativeModel,
    pub link_state_losses: Vec<f64>,
    pub vae_losses: Vec<f64>,
}

impl GenerativeModel {
    /// Checks the format version and every sub-model's architecture.
    pub fn validate(&self) -> Result<()> {
        if self.format_version != FORMAT_VERSION {
            return Err(Error::VersionMismatch {
                expected: FORMAT_VERSION,
                found: self.format_version,
            });
        }
        if !(self.carrier_hz > 0.0) || !(0.0..1.0).contains(&self.absent_eps) {
            return Err(Error::InvalidState("model carrier or absent threshold out of range"));
        }
        self.link_state.check()?;
        self.vae.check()?;
        check_len(1, self.codec.gain.dim())?;
        check_len(1, self.codec.delay.dim())
    }

    pub fn predict_state_probs(&self, u: &LinkCondition) -> Result<[f64; 3]> {
        self.link_state.predict_state_probs(u)
    }

    /// Generates the full path set of one link. Pure in `(self, u, draw)`.
    pub fn generate_link(&self, u: &LinkCondition, draw: &LatentDraw) -> Result<PathSet> {
        let s = sample_state(&self.predict_state_probs(u)?, draw.z_state);
        if s == LinkState::NoLink {
            return Ok(PathSet::empty());
        }
        let v = self.vae.transform_path_condition(u, s)?;
        let y = self.vae.sample_y(&v, &draw.z_nlos, &draw.z_out)?;
        let nlos = decode_nlos(&y, u, &self.codec, self.absent_eps)?;
        let paths = assemble_full_pathset(&nlos, s, u, self.carrier_hz)?;
        #[cfg(debug_assertions)]
        {
            let rec = crate::domain::LinkRecord {
                env_id: String::new(),
                condition: *u,
                paths,
            };
            debug_assert!(crate::domain::validate_record(&rec).is_valid());
        }
        Ok(paths)
    }

    /// One independent draw per condition, taken from substream `i` of `seed`
    /// for the condition at index `i`.
    pub fn generate_batch(&self, conditions: &[LinkCondition], seed: u64) -> Result<Vec<PathSet>> {
        conditions
            .iter()
            .enumerate()
            .map(|(i, u)| {
                let draw = LatentDraw::sample(&mut SeededRng::substream(seed, i as u64));
                self.generate_link(u, &draw)
            })
            .collect()
    }
}

/// Fits codec scalers, the link-state classifier and the VAE on `train`.
pub fn train_generative_model(
    train: &Dataset,
    env_id: &str,
    cfg: &TrainConfig,
    on_vae_epoch: Option<&mut dyn FnMut(usize, f64)>,
) -> Result<TrainedModel> {
    let codec = fit_codec_scalers(train)?;
    let ls = train_link_state(train, &cfg.link_state)?;
    let vae = train_vae(train, &codec, &cfg.vae, on_vae_epoch)?;
    let mut link_state_losses = vec![ls.initial_loss];
    link_state_losses.extend(ls.epoch_losses);
    let model = GenerativeModel {
        format_version: FORMAT_VERSION,
        env_id: env_id.into(),
        carrier_hz: train.carrier_hz,
        absent_eps: cfg.absent_eps,
        link_state: ls.model,
        vae: vae.model,
        codec,
    };
    model.validate()?;
    Ok(TrainedModel {
        model,
        link_state_losses,
        vae_losses: vae.epoch_losses,
    })
}
