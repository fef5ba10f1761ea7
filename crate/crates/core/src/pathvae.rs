//! Second generative stage: conditional VAE over the normalized NLOS vector.
//!
//! The encoder maps `[v_path, y]` to the mean and log-variance of a 20-dim
//! Gaussian posterior; the decoder maps `[v_path, z]` to a per-component mean
//! and log-variance of `y`. Training minimizes the negative ELBO with a single
//! reparameterized sample per datum.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::domain::{Dataset, LinkCondition, LinkState};
use crate::error::{check_len, Error, Result};
use crate::fmath;
use crate::numerics::{Activation, Adam, AdamConfig, BatchTrace, DenseNet, Grads, MinMaxScaler, SeededRng};
use crate::pathcodec::{encode_nlos, CodecScalers, Y_DIM};

pub const LATENT_DIM: usize = 20;
pub const PATH_COND_DIM: usize = 5;
pub const ENCODER_LAYERS: [usize; 4] = [PATH_COND_DIM + Y_DIM, 200, 80, 2 * LATENT_DIM];
pub const DECODER_LAYERS: [usize; 4] = [PATH_COND_DIM + LATENT_DIM, 80, 200, 2 * Y_DIM];
/// Clamp applied to the decoder's log-variance head.
pub const DECODER_LOGVAR_RANGE: (f64, f64) = (-10.0, 3.0);
/// Clamp applied to the encoder's log-variance head.
pub const ENCODER_LOGVAR_RANGE: (f64, f64) = (-10.0, 10.0);

const LN_2PI: f64 = 1.8378770664093453;

/// `[c, d3D, 10·log10 d3D, dz, s]` before scaling, with `s = 1` for LOS.
pub fn path_condition_raw(u: &LinkCondition, s: LinkState) -> Result<[f64; PATH_COND_DIM]> {
    let los = match s {
        LinkState::Los => 1.0,
        LinkState::Nlos => 0.0,
        LinkState::NoLink => {
            return Err(Error::InvalidArgument("NoLink links have no path condition".into()))
        }
    };
    let d3d = u.checked_d3d()?;
    Ok([u.gnb_type.one_hot(), d3d, 10.0 * fmath::log10(d3d), u.dz_m, los])
}

/// `z = mu + exp(logvar / 2) ⊙ eps`.
pub fn reparameterize(mu: &[f64], logvar: &[f64], eps: &[f64]) -> Result<Vec<f64>> {
    check_len(mu.len(), logvar.len())?;
    check_len(mu.len(), eps.len())?;
    Ok(mu
        .iter()
        .zip(logvar)
        .zip(eps)
        .map(|((m, lv), e)| m + fmath::exp(0.5 * lv) * e)
        .collect())
}

/// KL divergence of N(mu, diag e^logvar) from N(0, I).
pub fn kl_term(mu: &[f64], logvar: &[f64]) -> f64 {
    0.5 * mu
        .iter()
        .zip(logvar)
        .map(|(m, lv)| m * m + fmath::exp(*lv) - lv - 1.0)
        .sum::<f64>()
}

/// Gaussian negative log-likelihood of `y`.
pub fn recon_term(y: &[f64], mu: &[f64], logvar: &[f64]) -> f64 {
    0.5 * y
        .iter()
        .zip(mu)
        .zip(logvar)
        .map(|((y, m), lv)| (y - m) * (y - m) * fmath::exp(-lv) + lv + LN_2PI)
        .sum::<f64>()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElboTerms {
    pub recon: f64,
    pub kl: f64,
}

impl ElboTerms {
    /// Negative ELBO.
    pub fn total(&self) -> f64 {
        self.recon + self.kl
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VaeConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub adam: AdamConfig,
    pub seed: u64,
}

impl Default for VaeConfig {
    fn default() -> Self {
        VaeConfig {
            epochs: 10_000,
            batch_size: 100,
            adam: AdamConfig::with_learning_rate(1e-4),
            seed: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VaeModel {
    pub encoder: DenseNet,
    pub decoder: DenseNet,
    pub condition_scaler: MinMaxScaler,
}

#[derive(Debug, Clone)]
pub struct VaeFit {
    pub model: VaeModel,
    /// Mean negative ELBO per epoch.
    pub epoch_losses: Vec<f64>,
}

fn split_clamped(out: &[f64], half: usize, range: (f64, f64)) -> (Vec<f64>, Vec<f64>) {
    let mu = out[..half].to_vec();
    let lv = out[half..].iter().map(|x| x.clamp(range.0, range.1)).collect();
    (mu, lv)
}

fn concat(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut v = Vec::with_capacity(a.len() + b.len());
    v.extend_from_slice(a);
    v.extend_from_slice(b);
    v
}

/// Forward state of one minibatch, kept for backpropagation.
struct BatchPass {
    enc: BatchTrace,
    dec: BatchTrace,
    mu_z: Vec<f64>,
    lv_z: Vec<f64>,
    eps: Vec<f64>,
    loss: f64,
}

impl VaeModel {
    /// Untrained model with seeded weights and the given condition scaler.
    pub fn init(condition_scaler: MinMaxScaler, rng: &mut SeededRng) -> Result<Self> {
        check_len(PATH_COND_DIM, condition_scaler.dim())?;
        Ok(VaeModel {
            encoder: DenseNet::new(&ENCODER_LAYERS, Activation::Relu, Activation::Linear, rng)?,
            decoder: DenseNet::new(&DECODER_LAYERS, Activation::Relu, Activation::Linear, rng)?,
            condition_scaler,
        })
    }

    pub fn check(&self) -> Result<()> {
        self.encoder.check_shapes()?;
        self.decoder.check_shapes()?;
        if self.encoder.layer_sizes != ENCODER_LAYERS
            || self.decoder.layer_sizes != DECODER_LAYERS
            || self.condition_scaler.dim() != PATH_COND_DIM
        {
            return Err(Error::InvalidState("VAE has the wrong architecture"));
        }
        Ok(())
    }

    pub fn transform_path_condition(&self, u: &LinkCondition, s: LinkState) -> Result<Vec<f64>> {
        self.condition_scaler.apply(&path_condition_raw(u, s)?)
    }

    pub fn encode(&self, v_path: &[f64], y: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        check_len(PATH_COND_DIM, v_path.len())?;
        check_len(Y_DIM, y.len())?;
        let out = self.encoder.forward(&concat(v_path, y))?;
        Ok(split_clamped(&out, LATENT_DIM, ENCODER_LOGVAR_RANGE))
    }

    pub fn decode(&self, v_path: &[f64], z: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        check_len(PATH_COND_DIM, v_path.len())?;
        check_len(LATENT_DIM, z.len())?;
        let out = self.decoder.forward(&concat(v_path, z))?;
        Ok(split_clamped(&out, Y_DIM, DECODER_LOGVAR_RANGE))
    }

    pub fn sample_y(&self, v_path: &[f64], z_nlos: &[f64], z_out: &[f64]) -> Result<Vec<f64>> {
        let (mu, lv) = self.decode(v_path, z_nlos)?;
        reparameterize(&mu, &lv, z_out)
    }

    /// Negative ELBO of one datum at the latent sample picked by `eps`.
    pub fn elbo_loss(&self, v_path: &[f64], y: &[f64], eps: &[f64]) -> Result<ElboTerms> {
        let (mu_z, lv_z) = self.encode(v_path, y)?;
        let z = reparameterize(&mu_z, &lv_z, eps)?;
        let (mu_y, lv_y) = self.decode(v_path, &z)?;
        Ok(ElboTerms {
            recon: recon_term(y, &mu_y, &lv_y),
            kl: kl_term(&mu_z, &lv_z),
        })
    }

    fn forward_pass(&self, v: &[f64], y: &[f64], eps: Vec<f64>, b: usize) -> Result<BatchPass> {
        check_len(b * PATH_COND_DIM, v.len())?;
        check_len(b * Y_DIM, y.len())?;
        check_len(b * LATENT_DIM, eps.len())?;
        let mut enc_in = Vec::with_capacity(b * ENCODER_LAYERS[0]);
        for i in 0..b {
            enc_in.extend_from_slice(&v[i * PATH_COND_DIM..(i + 1) * PATH_COND_DIM]);
            enc_in.extend_from_slice(&y[i * Y_DIM..(i + 1) * Y_DIM]);
        }
        let enc = self.encoder.forward_batch(&enc_in, b)?;
        let mut mu_z = Vec::with_capacity(b * LATENT_DIM);
        let mut lv_z = Vec::with_capacity(b * LATENT_DIM);
        let mut dec_in = Vec::with_capacity(b * DECODER_LAYERS[0]);
        let mut loss = 0.0;
        for (i, row) in enc.output().chunks(2 * LATENT_DIM).enumerate() {
            let (mu, lv) = split_clamped(row, LATENT_DIM, ENCODER_LOGVAR_RANGE);
            loss += kl_term(&mu, &lv);
            dec_in.extend_from_slice(&v[i * PATH_COND_DIM..(i + 1) * PATH_COND_DIM]);
            dec_in.extend(reparameterize(&mu, &lv, &eps[i * LATENT_DIM..(i + 1) * LATENT_DIM])?);
            mu_z.extend(mu);
            lv_z.extend(lv);
        }
        let dec = self.decoder.forward_batch(&dec_in, b)?;
        for (i, row) in dec.output().chunks(2 * Y_DIM).enumerate() {
            let (mu, lv) = split_clamped(row, Y_DIM, DECODER_LOGVAR_RANGE);
            loss += recon_term(&y[i * Y_DIM..(i + 1) * Y_DIM], &mu, &lv);
        }
        Ok(BatchPass {
            enc,
            dec,
            mu_z,
            lv_z,
            eps,
            loss: loss / b as f64,
        })
    }

    /// Mean negative ELBO over a batch and its gradients with respect to the
    /// encoder and decoder parameters.
    pub fn batch_loss_and_grads(
        &self,
        v: &[f64],
        y: &[f64],
        eps: &[f64],
        b: usize,
    ) -> Result<(f64, Grads, Grads)> {
        let pass = self.forward_pass(v, y, eps.to_vec(), b)?;
        let inv_b = 1.0 / b as f64;
        let (lo, hi) = DECODER_LOGVAR_RANGE;

        let mut d_dec = vec![0.0; b * 2 * Y_DIM];
        for i in 0..b {
            let row = &pass.dec.output()[i * 2 * Y_DIM..(i + 1) * 2 * Y_DIM];
            let yi = &y[i * Y_DIM..(i + 1) * Y_DIM];
            let d = &mut d_dec[i * 2 * Y_DIM..(i + 1) * 2 * Y_DIM];
            for j in 0..Y_DIM {
                let raw_lv = row[Y_DIM + j];
                let lv = raw_lv.clamp(lo, hi);
                let r = yi[j] - row[j];
                let w = fmath::exp(-lv);
                d[j] = -r * w * inv_b;
                if (lo..=hi).contains(&raw_lv) {
                    d[Y_DIM + j] = 0.5 * (1.0 - r * r * w) * inv_b;
                }
            }
        }
        let (g_dec, d_dec_in) = self.decoder.backward_pre_activation(&pass.dec, &d_dec)?;

        let (lo, hi) = ENCODER_LOGVAR_RANGE;
        let mut d_enc = vec![0.0; b * 2 * LATENT_DIM];
        for i in 0..b {
            let dz = &d_dec_in[i * DECODER_LAYERS[0] + PATH_COND_DIM..(i + 1) * DECODER_LAYERS[0]];
            let raw = &pass.enc.output()[i * 2 * LATENT_DIM..(i + 1) * 2 * LATENT_DIM];
            let d = &mut d_enc[i * 2 * LATENT_DIM..(i + 1) * 2 * LATENT_DIM];
            for k in 0..LATENT_DIM {
                let idx = i * LATENT_DIM + k;
                let (mu, lv) = (pass.mu_z[idx], pass.lv_z[idx]);
                d[k] = dz[k] + mu * inv_b;
                if (lo..=hi).contains(&raw[LATENT_DIM + k]) {
                    let s = fmath::exp(0.5 * lv);
                    d[LATENT_DIM + k] = dz[k] * pass.eps[idx] * 0.5 * s + 0.5 * (s * s - 1.0) * inv_b;
                }
            }
        }
        let (g_enc, _) = self.encoder.backward_pre_activation(&pass.enc, &d_enc)?;
        Ok((pass.loss, g_enc, g_dec))
    }

    /// Mean negative ELBO over a batch without gradients.
    pub fn batch_loss(&self, v: &[f64], y: &[f64], eps: &[f64], b: usize) -> Result<f64> {
        Ok(self.forward_pass(v, y, eps.to_vec(), b)?.loss)
    }
}

/// Scaled conditions and encoded targets of the VAE-eligible (LOS or NLOS) links.
#[derive(Debug, Clone)]
pub struct VaeTrainingSet {
    pub v: Vec<f64>,
    pub y: Vec<f64>,
    pub len: usize,
}

/// Fits the condition scaler and encodes every LOS/NLOS link. NoLink links are
/// skipped.
pub fn prepare_training_set(
    train: &Dataset,
    codec: &CodecScalers,
) -> Result<(MinMaxScaler, VaeTrainingSet)> {
    let mut raw = Vec::new();
    let mut y = Vec::new();
    for rec in &train.records {
        let s = rec.state();
        if s == LinkState::NoLink {
            continue;
        }
        raw.push(path_condition_raw(&rec.condition, s)?);
        y.extend(encode_nlos(&rec.paths.without_los(), &rec.condition, codec)?);
    }
    if raw.is_empty() {
        return Err(Error::Empty("no LOS or NLOS links to train the VAE on"));
    }
    let scaler = MinMaxScaler::fit(raw.iter().map(|r| &r[..]), None)?;
    let mut v = Vec::with_capacity(raw.len() * PATH_COND_DIM);
    for r in &raw {
        v.extend(scaler.apply(r)?);
    }
    let len = raw.len();
    Ok((scaler, VaeTrainingSet { v, y, len }))
}

/// Trains encoder and decoder jointly with Adam on the mean negative ELBO.
/// `on_epoch` is called after every epoch with its index and mean loss.
pub fn train_vae(
    train: &Dataset,
    codec: &CodecScalers,
    cfg: &VaeConfig,
    mut on_epoch: Option<&mut dyn FnMut(usize, f64)>,
) -> Result<VaeFit> {
    if cfg.batch_size == 0 {
        return Err(Error::InvalidArgument("batch size must be positive".into()));
    }
    let (scaler, set) = prepare_training_set(train, codec)?;
    let mut rng = SeededRng::new(cfg.seed);
    let mut model = VaeModel::init(scaler, &mut rng)?;
    let mut sizes = model.encoder.block_sizes();
    sizes.extend(model.decoder.block_sizes());
    let mut adam = Adam::new(cfg.adam, &sizes);

    let mut order: Vec<usize> = (0..set.len).collect();
    let mut epoch_losses = Vec::with_capacity(cfg.epochs);
    let mut vb = Vec::with_capacity(cfg.batch_size * PATH_COND_DIM);
    let mut yb = Vec::with_capacity(cfg.batch_size * Y_DIM);
    let mut eps = Vec::with_capacity(cfg.batch_size * LATENT_DIM);
    for epoch in 0..cfg.epochs {
        rng.shuffle(&mut order);
        let mut total = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            let b = chunk.len();
            vb.clear();
            yb.clear();
            for &i in chunk {
                vb.extend_from_slice(&set.v[i * PATH_COND_DIM..(i + 1) * PATH_COND_DIM]);
                yb.extend_from_slice(&set.y[i * Y_DIM..(i + 1) * Y_DIM]);
            }
            eps.resize(b * LATENT_DIM, 0.0);
            rng.fill_normal(&mut eps);
            let (loss, g_enc, g_dec) = model.batch_loss_and_grads(&vb, &yb, &eps, b)?;
            total += loss * b as f64;
            let mut grads = g_enc.blocks();
            grads.extend(g_dec.blocks());
            let mut params = model.encoder.param_blocks_mut();
            params.extend(model.decoder.param_blocks_mut());
            adam.step(&mut params, &grads)?;
        }
        let mean = total / set.len as f64;
        epoch_losses.push(mean);
        if let Some(cb) = on_epoch.as_mut() {
            cb(epoch, mean);
        }
    }
    Ok(VaeFit { model, epoch_losses })
}
