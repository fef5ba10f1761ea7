//! 3GPP UMi-AV closed-form LOS probability and path loss, in nominal form and
//! refit to data through clamped per-coefficient multipliers.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::domain::{Dataset, GnbType, LinkCondition, LinkState};
use crate::error::{check_len, Error, Result};
use crate::fmath;
use crate::metrics::{omni_pathloss, OmniMode};
use crate::numerics::{Adam, AdamConfig, SeededRng};
use crate::pathcodec::friis_loss;
use crate::SPEED_OF_LIGHT;

/// Height of a street-level gNB.
pub const H_GNB_STANDARD_M: f64 = 2.0;
/// Height of a rooftop gNB.
pub const H_GNB_DEDICATED_M: f64 = 30.0;
/// UAV heights at or below this use the terrestrial formulas.
pub const LOW_ALTITUDE_MAX_M: f64 = 22.5;
pub const H_MIN_M: f64 = 1.5;
pub const H_MAX_M: f64 = 300.0;

pub const ALPHA_NOMINAL: [f64; 6] = [18.0, 36.0, 294.05, -432.94, 233.98, -0.95];

/// Path-loss coefficients, grouped by branch:
///
/// - `0..4` high-altitude LOS: intercept, distance slope, height coupling, frequency slope;
/// - `4..8` high-altitude NLOS: same layout;
/// - `8..13` low-altitude LOS (street canyon): intercept, slope before the
///   breakpoint, slope after it, frequency slope, breakpoint correction;
/// - `13..17` low-altitude NLOS: intercept, distance slope, frequency slope, height slope.
pub const BETA_NOMINAL: [f64; 17] = [
    30.9, 22.25, 0.5, 20.0, //
    32.4, 43.2, 7.6, 20.0, //
    32.4, 21.0, 40.0, 20.0, 9.5, //
    22.4, 35.3, 21.3, 0.3,
];

pub const MULTIPLIER_RANGE: (f64, f64) = (0.01, 10.0);

pub fn gnb_height_m(gnb: GnbType) -> f64 {
    match gnb {
        GnbType::Standard => H_GNB_STANDARD_M,
        GnbType::Dedicated => H_GNB_DEDICATED_M,
    }
}

/// Inputs of the closed-form models.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GppCondition {
    /// UAV height above ground.
    pub h_m: f64,
    pub d2d_m: f64,
    pub d3d_m: f64,
    pub h_gnb_m: f64,
}

impl GppCondition {
    pub fn from_link(u: &LinkCondition) -> Self {
        let h_gnb_m = gnb_height_m(u.gnb_type);
        GppCondition {
            h_m: u.dz_m + h_gnb_m,
            d2d_m: u.d2d(),
            d3d_m: u.d3d(),
            h_gnb_m,
        }
    }

    pub fn is_valid(&self) -> bool {
        (H_MIN_M..=H_MAX_M).contains(&self.h_m) && self.d3d_m > 0.0
    }

    fn check(&self) -> Result<()> {
        if self.is_valid() {
            Ok(())
        } else {
            Err(Error::InvalidArgument(alloc::format!(
                "UAV height {} m outside [{H_MIN_M}, {H_MAX_M}] or zero distance",
                self.h_m
            )))
        }
    }
}

/// LOS probability beyond the breakpoint `d1`, with its partial derivatives
/// with respect to the breakpoint and the decay length.
fn plos_tail(d2d: f64, d1: f64, p: f64) -> (f64, f64, f64) {
    let ratio = d1 / d2d;
    if !(p > 0.0) {
        // decay length collapsed: only the geometric term remains
        return (ratio, 1.0 / d2d, 0.0);
    }
    let e = fmath::exp(-d2d / p);
    let value = ratio + e * (1.0 - ratio);
    (value, (1.0 - e) / d2d, e * d2d / (p * p) * (1.0 - ratio))
}

/// LOS probability and its gradient with respect to the six alphas.
fn plos_with_grad(c: &GppCondition, a: &[f64; 6]) -> (f64, [f64; 6]) {
    let mut g = [0.0; 6];
    let d = c.d2d_m;
    if c.h_m <= LOW_ALTITUDE_MAX_M {
        if d <= a[0] {
            return (1.0, g);
        }
        let (v, dd1, dp) = plos_tail(d, a[0], a[1]);
        g[0] = dd1;
        g[1] = dp;
        return clip_unit(v, g);
    }
    let lh = fmath::log10(c.h_m);
    let p1 = a[2] * lh + a[3];
    let d1_raw = a[4] * lh + a[5];
    let d1 = d1_raw.max(a[0]);
    if d <= d1 {
        return (1.0, g);
    }
    let (v, dd1, dp) = plos_tail(d, d1, p1);
    g[2] = dp * lh;
    g[3] = dp;
    if d1_raw >= a[0] {
        g[4] = dd1 * lh;
        g[5] = dd1;
    } else {
        g[0] = dd1;
    }
    clip_unit(v, g)
}

fn clip_unit(v: f64, g: [f64; 6]) -> (f64, [f64; 6]) {
    if (0.0..=1.0).contains(&v) {
        (v, g)
    } else {
        (v.clamp(0.0, 1.0), [0.0; 6])
    }
}

/// LOS probability from UAV height `h_m` and horizontal distance.
pub fn plos_3gpp(c: &GppCondition, alpha: &[f64; 6]) -> Result<f64> {
    c.check()?;
    Ok(plos_with_grad(c, alpha).0)
}

fn pathloss_with_grad(c: &GppCondition, s: LinkState, b: &[f64], f_hz: f64, grad: &mut [f64]) -> f64 {
    grad.iter_mut().for_each(|g| *g = 0.0);
    let ld = fmath::log10(c.d3d_m);
    let lf = fmath::log10(f_hz / 1e9);
    let nlos = s == LinkState::Nlos;
    if c.h_m > LOW_ALTITUDE_MAX_M {
        let lh = fmath::log10(c.h_m);
        let los = b[0] + (b[1] - b[2] * lh) * ld + b[3] * lf;
        let fspl = friis_loss(c.d3d_m, f_hz).unwrap_or(0.0);
        let mut pl = fspl;
        if los > fspl {
            pl = los;
            grad[..4].copy_from_slice(&[1.0, ld, -lh * ld, lf]);
        }
        if nlos {
            let v = b[4] + (b[5] - b[6] * lh) * ld + b[7] * lf;
            if v > pl {
                pl = v;
                grad[..4].iter_mut().for_each(|g| *g = 0.0);
                grad[4..8].copy_from_slice(&[1.0, ld, -lh * ld, lf]);
            }
        }
        pl
    } else {
        let d_bp = 4.0 * (c.h_gnb_m - 1.0) * (c.h_m - 1.0) * f_hz / SPEED_OF_LIGHT;
        let mut pl;
        if d_bp <= 0.0 || c.d2d_m <= d_bp {
            pl = b[8] + b[9] * ld + b[11] * lf;
            grad[8] = 1.0;
            grad[9] = ld;
            grad[11] = lf;
        } else {
            let corr = fmath::log10(d_bp * d_bp + (c.h_gnb_m - c.h_m) * (c.h_gnb_m - c.h_m));
            pl = b[8] + b[10] * ld + b[11] * lf - b[12] * corr;
            grad[8] = 1.0;
            grad[10] = ld;
            grad[11] = lf;
            grad[12] = -corr;
        }
        if nlos {
            let v = b[13] + b[14] * ld + b[15] * lf - b[16] * (c.h_m - 1.5);
            if v > pl {
                pl = v;
                grad[8..13].iter_mut().for_each(|g| *g = 0.0);
                grad[13..17].copy_from_slice(&[1.0, ld, lf, -(c.h_m - 1.5)]);
            }
        }
        pl
    }
}

/// Path loss in dB for a LOS or NLOS link.
pub fn pathloss_3gpp(c: &GppCondition, s: LinkState, beta: &[f64], f_hz: f64) -> Result<f64> {
    check_len(BETA_NOMINAL.len(), beta.len())?;
    c.check()?;
    if s == LinkState::NoLink {
        return Err(Error::InvalidArgument("path loss is undefined for NoLink".into()));
    }
    if !(f_hz > 0.0) {
        return Err(Error::InvalidArgument("carrier must be positive".into()));
    }
    let mut g = [0.0; 17];
    Ok(pathloss_with_grad(c, s, beta, f_hz, &mut g))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GppFitConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub adam: AdamConfig,
    pub seed: u64,
    /// Restrict fitting to one gNB type.
    pub gnb_filter: Option<GnbType>,
}

impl Default for GppFitConfig {
    fn default() -> Self {
        GppFitConfig {
            epochs: 50,
            batch_size: 128,
            adam: AdamConfig::with_learning_rate(1e-3),
            seed: 3,
            gnb_filter: None,
        }
    }
}

/// Fitted parameters as nominal values times clamped multipliers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaledParams {
    pub nominal: Vec<f64>,
    pub multipliers: Vec<f64>,
}

impl ScaledParams {
    pub fn nominal(values: &[f64]) -> Self {
        ScaledParams {
            nominal: values.to_vec(),
            multipliers: vec![1.0; values.len()],
        }
    }

    pub fn values(&self) -> Vec<f64> {
        self.nominal.iter().zip(&self.multipliers).map(|(n, m)| n * m).collect()
    }

    /// The six LOS-probability parameters, if this holds exactly six.
    pub fn alpha(&self) -> Result<[f64; 6]> {
        check_len(6, self.nominal.len())?;
        check_len(6, self.multipliers.len())?;
        let v = self.values();
        Ok([v[0], v[1], v[2], v[3], v[4], v[5]])
    }
}

#[derive(Debug, Clone)]
pub struct GppFit {
    pub params: ScaledParams,
    pub epoch_losses: Vec<f64>,
}

/// Minibatch Adam over multipliers. `grad_fn(i, values, g)` returns the loss of
/// sample `i` and writes d(loss)/d(values) into `g`.
fn fit_multipliers<F>(nominal: &[f64], n: usize, cfg: &GppFitConfig, mut grad_fn: F) -> Result<GppFit>
where
    F: FnMut(usize, &[f64], &mut [f64]) -> f64,
{
    if cfg.batch_size == 0 {
        return Err(Error::InvalidArgument("batch size must be positive".into()));
    }
    let k = nominal.len();
    let mut params = ScaledParams::nominal(nominal);
    let mut adam = Adam::new(cfg.adam, &[k]);
    let mut rng = SeededRng::new(cfg.seed);
    let mut order: Vec<usize> = (0..n).collect();
    let mut epoch_losses = Vec::with_capacity(cfg.epochs);
    let mut g = vec![0.0; k];
    let mut acc = vec![0.0; k];
    for _ in 0..cfg.epochs {
        rng.shuffle(&mut order);
        let mut total = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            let values = params.values();
            acc.iter_mut().for_each(|a| *a = 0.0);
            for &i in chunk {
                total += grad_fn(i, &values, &mut g);
                for j in 0..k {
                    acc[j] += g[j] * nominal[j];
                }
            }
            acc.iter_mut().for_each(|a| *a /= chunk.len() as f64);
            adam.step(&mut [&mut params.multipliers[..]], &[&acc[..]])?;
            for m in params.multipliers.iter_mut() {
                *m = m.clamp(MULTIPLIER_RANGE.0, MULTIPLIER_RANGE.1);
            }
        }
        epoch_losses.push(total / n as f64);
    }
    Ok(GppFit { params, epoch_losses })
}

const BCE_FLOOR: f64 = 1e-7;

/// Refits the LOS probability by binary cross entropy. NoLink links count as
/// non-LOS; links outside the model's height range are skipped.
pub fn fit_plos(train: &Dataset, cfg: &GppFitConfig) -> Result<GppFit> {
    let samples: Vec<(GppCondition, f64)> = train
        .filter_gnb(cfg.gnb_filter)
        .map(|r| {
            let y = if r.state() == LinkState::Los { 1.0 } else { 0.0 };
            (GppCondition::from_link(&r.condition), y)
        })
        .filter(|(c, _)| c.is_valid())
        .collect();
    if samples.is_empty() {
        return Err(Error::Empty("no links eligible for the LOS probability fit"));
    }
    fit_multipliers(&ALPHA_NOMINAL, samples.len(), cfg, |i, v, g| {
        let (c, y) = samples[i];
        let a = [v[0], v[1], v[2], v[3], v[4], v[5]];
        let (p, dp) = plos_with_grad(&c, &a);
        let pc = p.clamp(BCE_FLOOR, 1.0 - BCE_FLOOR);
        let dl = if p == pc { (pc - y) / (pc * (1.0 - pc)) } else { 0.0 };
        for j in 0..6 {
            g[j] = dl * dp[j];
        }
        -(y * fmath::ln(pc) + (1.0 - y) * fmath::ln(1.0 - pc))
    })
}

/// Refits the path-loss coefficients by mean squared error against the
/// omnidirectional (power-sum) path loss of every LOS and NLOS link.
pub fn fit_pathloss(train: &Dataset, cfg: &GppFitConfig) -> Result<GppFit> {
    let mut samples = Vec::new();
    for r in train.filter_gnb(cfg.gnb_filter) {
        let s = r.state();
        let c = GppCondition::from_link(&r.condition);
        if s == LinkState::NoLink || !c.is_valid() {
            continue;
        }
        samples.push((c, s, omni_pathloss(&r.paths, OmniMode::PowerSum)?));
    }
    fit_pathloss_samples(&samples, train.carrier_hz, cfg)
}

/// [`fit_pathloss`] on explicit `(condition, state, target dB)` triples.
pub fn fit_pathloss_samples(
    samples: &[(GppCondition, LinkState, f64)],
    f_hz: f64,
    cfg: &GppFitConfig,
) -> Result<GppFit> {
    if samples.is_empty() {
        return Err(Error::Empty("no links eligible for the path-loss fit"));
    }
    if samples.iter().any(|(c, s, _)| !c.is_valid() || *s == LinkState::NoLink) {
        return Err(Error::InvalidArgument("path-loss samples must be valid LOS/NLOS links".into()));
    }
    fit_multipliers(&BETA_NOMINAL, samples.len(), cfg, |i, v, g| {
        let (c, s, t) = samples[i];
        let r = pathloss_with_grad(&c, s, v, f_hz, g) - t;
        g.iter_mut().for_each(|x| *x *= 2.0 * r);
        r * r
    })
}

/// Mean squared error of `beta` on the samples.
pub fn pathloss_mse(samples: &[(GppCondition, LinkState, f64)], beta: &[f64], f_hz: f64) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::Empty("path-loss samples"));
    }
    let mut total = 0.0;
    for (c, s, t) in samples {
        let r = pathloss_3gpp(c, *s, beta, f_hz)? - t;
        total += r * r;
    }
    Ok(total / samples.len() as f64)
}
