//! First generative stage: link-state classifier and state sampling.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::domain::{Dataset, GnbType, LinkCondition, LinkState};
use crate::error::{Error, Result};
use crate::numerics::{
    cross_entropy, Activation, Adam, AdamConfig, DenseNet, MinMaxScaler, SeededRng,
};

/// Width of the state condition vector (3C − 1 for C = 2 gNB types).
pub const STATE_COND_DIM: usize = 5;
/// Classifier layer widths.
pub const CLASSIFIER_LAYERS: [usize; 4] = [STATE_COND_DIM, 25, 10, 3];

/// `[c, d3D·1{Standard}, dz·1{Standard}, d3D·1{Dedicated}, dz·1{Dedicated}]`
/// before scaling.
pub fn transform_state_condition(u: &LinkCondition) -> Result<[f64; STATE_COND_DIM]> {
    let d3d = u.checked_d3d()?;
    Ok(match u.gnb_type {
        GnbType::Standard => [0.0, d3d, u.dz_m, 0.0, 0.0],
        GnbType::Dedicated => [1.0, 0.0, 0.0, d3d, u.dz_m],
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LinkStateConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub adam: AdamConfig,
    pub seed: u64,
}

impl Default for LinkStateConfig {
    fn default() -> Self {
        LinkStateConfig {
            epochs: 50,
            batch_size: 100,
            adam: AdamConfig::with_learning_rate(1e-3),
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkStateModel {
    pub classifier: DenseNet,
    pub scaler: MinMaxScaler,
}

/// A trained model together with its training curve.
#[derive(Debug, Clone)]
pub struct LinkStateFit {
    pub model: LinkStateModel,
    /// Mean cross entropy over the training set before the first update.
    pub initial_loss: f64,
    /// Mean minibatch cross entropy of each epoch.
    pub epoch_losses: Vec<f64>,
}

impl LinkStateModel {
    fn scaled_input(&self, u: &LinkCondition) -> Result<Vec<f64>> {
        self.scaler.apply(&transform_state_condition(u)?)
    }

    /// Probabilities in the order (LOS, NLOS, NoLink).
    pub fn predict_state_probs(&self, u: &LinkCondition) -> Result<[f64; 3]> {
        let out = self.classifier.forward(&self.scaled_input(u)?)?;
        Ok([out[0], out[1], out[2]])
    }

    pub fn check(&self) -> Result<()> {
        self.classifier.check_shapes()?;
        if self.classifier.layer_sizes != CLASSIFIER_LAYERS
            || self.classifier.output_activation != Activation::Softmax
            || self.scaler.dim() != STATE_COND_DIM
        {
            return Err(Error::InvalidState("link-state model has the wrong architecture"));
        }
        Ok(())
    }
}

/// Inverse-CDF sampling over (LOS, NLOS, NoLink).
pub fn sample_state(probs: &[f64; 3], z_state: f64) -> LinkState {
    if z_state < probs[0] {
        LinkState::Los
    } else if z_state < probs[0] + probs[1] {
        LinkState::Nlos
    } else {
        LinkState::NoLink
    }
}

fn mean_loss(net: &DenseNet, inputs: &[f64], labels: &[usize]) -> Result<f64> {
    let trace = net.forward_batch(inputs, labels.len())?;
    let mut total = 0.0;
    for (p, &y) in trace.output().chunks(3).zip(labels) {
        total += cross_entropy(p, y)?;
    }
    Ok(total / labels.len() as f64)
}

pub fn train_link_state(train: &Dataset, cfg: &LinkStateConfig) -> Result<LinkStateFit> {
    if train.is_empty() {
        return Err(Error::Empty("link-state training set"));
    }
    if cfg.batch_size == 0 {
        return Err(Error::InvalidArgument("batch size must be positive".into()));
    }
    let raw: Vec<[f64; STATE_COND_DIM]> = train
        .records
        .iter()
        .map(|r| transform_state_condition(&r.condition))
        .collect::<Result<_>>()?;
    let scaler = MinMaxScaler::fit(raw.iter().map(|r| &r[..]), None)?;
    let mut inputs = Vec::with_capacity(raw.len() * STATE_COND_DIM);
    for r in &raw {
        inputs.extend(scaler.apply(r)?);
    }
    let labels: Vec<usize> = train.records.iter().map(|r| r.state().index()).collect();

    let mut rng = SeededRng::new(cfg.seed);
    let mut net = DenseNet::new(&CLASSIFIER_LAYERS, Activation::Relu, Activation::Softmax, &mut rng)?;
    let mut adam = Adam::new(cfg.adam, &net.block_sizes());
    let initial_loss = mean_loss(&net, &inputs, &labels)?;

    let n = labels.len();
    let mut order: Vec<usize> = (0..n).collect();
    let mut epoch_losses = Vec::with_capacity(cfg.epochs);
    let mut xb = Vec::with_capacity(cfg.batch_size * STATE_COND_DIM);
    for _ in 0..cfg.epochs {
        rng.shuffle(&mut order);
        let mut total = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            let b = chunk.len();
            xb.clear();
            for &i in chunk {
                xb.extend_from_slice(&inputs[i * STATE_COND_DIM..(i + 1) * STATE_COND_DIM]);
            }
            let trace = net.forward_batch(&xb, b)?;
            // softmax + cross entropy: d/dlogits = p − onehot
            let mut d_pre = trace.output().to_vec();
            for (row, &i) in d_pre.chunks_mut(3).zip(chunk) {
                total += cross_entropy(row, labels[i])?;
                row[labels[i]] -= 1.0;
                row.iter_mut().for_each(|g| *g /= b as f64);
            }
            let (grads, _) = net.backward_pre_activation(&trace, &d_pre)?;
            adam.step(&mut net.param_blocks_mut(), &grads.blocks())?;
        }
        epoch_losses.push(total / n as f64);
    }
    Ok(LinkStateFit {
        model: LinkStateModel {
            classifier: net,
            scaler,
        },
        initial_loss,
        epoch_losses,
    })
}

/// One horizontal-distance bin of an empirical LOS-probability curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlosBin {
    pub gnb_type: GnbType,
    pub d2d_lo_m: f64,
    pub d2d_hi_m: f64,
    pub n_links: usize,
    pub n_los: usize,
}

impl PlosBin {
    pub fn center_m(&self) -> f64 {
        0.5 * (self.d2d_lo_m + self.d2d_hi_m)
    }

    /// LOS fraction, or `None` for an empty bin.
    pub fn p_los(&self) -> Option<f64> {
        (self.n_links > 0).then(|| self.n_los as f64 / self.n_links as f64)
    }
}

/// Per-type binned LOS fraction over horizontal distance. Bins run from 0 up to
/// the largest observed distance of each type; empty bins are kept and report
/// `p_los() == None`.
pub fn empirical_plos_curve(data: &Dataset, bin_width_m: f64) -> Result<Vec<PlosBin>> {
    if !(bin_width_m > 0.0) {
        return Err(Error::InvalidArgument("bin width must be positive".into()));
    }
    let mut out = Vec::new();
    for gnb in GnbType::ALL {
        let recs: Vec<_> = data.filter_gnb(Some(gnb)).collect();
        if recs.is_empty() {
            continue;
        }
        let max_d = recs.iter().map(|r| r.condition.d2d()).fold(0.0, f64::max);
        let n_bins = (max_d / bin_width_m) as usize + 1;
        let mut counts = vec![(0usize, 0usize); n_bins];
        for r in recs {
            let b = ((r.condition.d2d() / bin_width_m) as usize).min(n_bins - 1);
            counts[b].0 += 1;
            if r.state() == LinkState::Los {
                counts[b].1 += 1;
            }
        }
        out.extend(counts.into_iter().enumerate().map(|(b, (n_links, n_los))| PlosBin {
            gnb_type: gnb,
            d2d_lo_m: b as f64 * bin_width_m,
            d2d_hi_m: (b + 1) as f64 * bin_width_m,
            n_links,
            n_los,
        }));
    }
    Ok(out)
}

/// Mean absolute difference between nonempty bins and a reference curve
/// evaluated at bin centers. `None` if every bin is empty.
pub fn plos_curve_mae<F>(bins: &[PlosBin], mut reference: F) -> Option<f64>
where
    F: FnMut(GnbType, f64) -> f64,
{
    let mut sum = 0.0;
    let mut n = 0usize;
    for b in bins {
        if let Some(p) = b.p_los() {
            sum += (p - reference(b.gnb_type, b.center_m())).abs();
            n += 1;
        }
    }
    (n > 0).then(|| sum / n as f64)
}
