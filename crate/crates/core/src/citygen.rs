//! Synthetic city with analytically known statistics, and train/test splitting.
//!
//! Each link places a UAV at one of a few altitudes and a random horizontal
//! offset from a gNB of random type. Its state follows a 3GPP-family LOS curve
//! (plus a NoLink ramp beyond a range cutoff). NLOS path losses follow a
//! distance law with lognormal shadowing and exponential increments between
//! successive paths; angles are Laplacian around the LOS direction with a
//! spread that decays with distance; delays add an exponential excess.

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::domain::{Dataset, GnbType, LinkCondition, LinkRecord, LinkState, PathEntry, PathSet, K_PATHS, MAX_LOSS_DB};
use crate::error::{Error, Result};
use crate::fmath;
use crate::gpp::{gnb_height_m, plos_3gpp, GppCondition, ALPHA_NOMINAL};
use crate::numerics::SeededRng;
use crate::pathcodec::{fold_elevation, friis_loss, los_geometry};

/// Paths weaker than this are dropped.
const LOSS_CEILING_DB: f64 = 199.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OracleConfig {
    pub env_id: String,
    pub carrier_hz: f64,
    pub altitudes_m: Vec<f64>,
    pub d2d_min_m: f64,
    pub d2d_max_m: f64,
    pub dedicated_fraction: f64,
    /// Multipliers on the nominal LOS-probability parameters, per gNB type.
    pub plos_multipliers_standard: [f64; 6],
    pub plos_multipliers_dedicated: [f64; 6],
    /// Beyond this 3D distance a non-LOS link may have no paths at all.
    pub nolink_cutoff_m: f64,
    /// Distance over which the NoLink probability ramps from 0 to its maximum.
    pub nolink_ramp_m: f64,
    pub nolink_max: f64,
    /// Poisson mean of the NLOS path count.
    pub nlos_path_mean: f64,
    /// Strongest NLOS path: Friis + extra + 10·(exponent − 2)·log10 d + shadowing.
    pub nlos_extra_loss_db: f64,
    pub nlos_exponent: f64,
    pub shadow_sigma_db: f64,
    /// Added to the NLOS paths of a LOS link.
    pub los_link_offset_db: f64,
    /// Mean loss step between successive NLOS paths.
    pub path_increment_mean_db: f64,
    /// Laplacian scale of azimuth offsets: `floor + (near − floor)·e^{−d/decay}`.
    pub angle_scale_near_deg: f64,
    pub angle_scale_floor_deg: f64,
    pub angle_decay_m: f64,
    /// Arrival spread at the gNB relative to departure spread at the UAV.
    pub aoa_spread_factor: f64,
    /// Elevation spread relative to azimuth spread.
    pub elevation_spread_factor: f64,
    pub excess_delay_mean_ns: f64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig {
            env_id: "oracle".into(),
            carrier_hz: 28e9,
            altitudes_m: alloc::vec![30.0, 60.0, 90.0, 120.0],
            d2d_min_m: 10.0,
            d2d_max_m: 350.0,
            dedicated_fraction: 0.5,
            plos_multipliers_standard: [1.0, 1.0, 0.5, 0.5, 0.25, 1.0],
            plos_multipliers_dedicated: [1.0, 1.0, 1.0, 1.0, 0.6, 1.0],
            nolink_cutoff_m: 150.0,
            nolink_ramp_m: 200.0,
            nolink_max: 0.6,
            nlos_path_mean: 5.0,
            nlos_extra_loss_db: 12.0,
            nlos_exponent: 2.4,
            shadow_sigma_db: 5.0,
            los_link_offset_db: 6.0,
            path_increment_mean_db: 4.0,
            angle_scale_near_deg: 40.0,
            angle_scale_floor_deg: 3.0,
            angle_decay_m: 120.0,
            aoa_spread_factor: 1.5,
            elevation_spread_factor: 0.5,
            excess_delay_mean_ns: 80.0,
        }
    }
}

impl OracleConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            self.carrier_hz,
            self.d2d_min_m,
            self.nolink_ramp_m,
            self.nlos_path_mean,
            self.path_increment_mean_db,
            self.angle_scale_near_deg,
            self.angle_scale_floor_deg,
            self.angle_decay_m,
            self.aoa_spread_factor,
            self.elevation_spread_factor,
            self.excess_delay_mean_ns,
        ];
        let ok = positive.iter().all(|v| *v > 0.0)
            && self.d2d_max_m >= self.d2d_min_m
            && self.shadow_sigma_db >= 0.0
            && self.nolink_cutoff_m >= 0.0
            && (0.0..=1.0).contains(&self.nolink_max)
            && (0.0..=1.0).contains(&self.dedicated_fraction)
            && !self.altitudes_m.is_empty()
            && self
                .altitudes_m
                .iter()
                .all(|h| (crate::gpp::H_MIN_M..=crate::gpp::H_MAX_M).contains(h))
            && self
                .plos_multipliers_standard
                .iter()
                .chain(&self.plos_multipliers_dedicated)
                .all(|m| *m > 0.0);
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument("oracle configuration out of range".into()))
        }
    }

    pub fn alpha(&self, gnb: GnbType) -> [f64; 6] {
        let m = match gnb {
            GnbType::Standard => self.plos_multipliers_standard,
            GnbType::Dedicated => self.plos_multipliers_dedicated,
        };
        core::array::from_fn(|i| ALPHA_NOMINAL[i] * m[i])
    }

    /// Generating LOS probability at UAV altitude `h_m` and horizontal distance.
    pub fn plos(&self, gnb: GnbType, h_m: f64, d2d_m: f64) -> f64 {
        let c = GppCondition {
            h_m,
            d2d_m,
            d3d_m: fmath::hypot(d2d_m, h_m - gnb_height_m(gnb)).max(1e-9),
            h_gnb_m: gnb_height_m(gnb),
        };
        plos_3gpp(&c, &self.alpha(gnb)).unwrap_or(0.0)
    }

    /// Generating LOS probability of a link condition.
    pub fn plos_for(&self, u: &LinkCondition) -> f64 {
        self.plos(u.gnb_type, u.dz_m + gnb_height_m(u.gnb_type), u.d2d())
    }

    /// Probability that a non-LOS link has no paths.
    pub fn nolink_prob(&self, d3d_m: f64) -> f64 {
        ((d3d_m - self.nolink_cutoff_m) / self.nolink_ramp_m).clamp(0.0, 1.0) * self.nolink_max
    }

    /// Laplacian scale of the azimuth offset at the UAV.
    pub fn angle_scale_deg(&self, d3d_m: f64) -> f64 {
        self.angle_scale_floor_deg
            + (self.angle_scale_near_deg - self.angle_scale_floor_deg) * fmath::exp(-d3d_m / self.angle_decay_m)
    }
}

fn nlos_paths(cfg: &OracleConfig, u: &LinkCondition, los_link: bool, rng: &mut SeededRng) -> Result<Vec<PathEntry>> {
    let d3d = u.checked_d3d()?;
    let los = los_geometry(u.displacement(), cfg.carrier_hz)?;
    let max_n = K_PATHS - 1;
    let n = if los_link {
        rng.poisson(cfg.nlos_path_mean).min(max_n)
    } else {
        (1 + rng.poisson(cfg.nlos_path_mean - 1.0_f64.min(cfg.nlos_path_mean))).min(max_n)
    };
    let mut loss = friis_loss(d3d, cfg.carrier_hz)?
        + cfg.nlos_extra_loss_db
        + 10.0 * (cfg.nlos_exponent - 2.0) * fmath::log10(d3d)
        + cfg.shadow_sigma_db * rng.normal();
    if los_link {
        loss += cfg.los_link_offset_db;
    }
    // a reflection is never stronger than the direct path
    loss = loss.max(los.loss_db + 0.1);
    let b_tx = cfg.angle_scale_deg(d3d);
    let b_rx = b_tx * cfg.aoa_spread_factor;
    let e = cfg.elevation_spread_factor;
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        if loss >= LOSS_CEILING_DB {
            break;
        }
        out.push(PathEntry {
            loss_db: loss,
            aoa_az_deg: fmath::wrap_deg(los.aoa_az_deg + rng.laplace(b_rx)),
            aoa_el_deg: reflect_el(los.aoa_el_deg + rng.laplace(b_rx * e)),
            aod_az_deg: fmath::wrap_deg(los.aod_az_deg + rng.laplace(b_tx)),
            aod_el_deg: reflect_el(los.aod_el_deg + rng.laplace(b_tx * e)),
            delay_s: los.tau_s + rng.exponential(cfg.excess_delay_mean_ns) * 1e-9,
            is_los: false,
        });
        loss += rng.exponential(cfg.path_increment_mean_db);
    }
    Ok(out)
}

/// Folds an elevation back into [0, 180] however far it overshot.
fn reflect_el(mut el: f64) -> f64 {
    el -= 360.0 * fmath::floor(el / 360.0);
    fold_elevation(el).clamp(0.0, 180.0)
}

/// Draws link `index` of a city from its own substream of `seed`.
pub fn generate_link(cfg: &OracleConfig, seed: u64, index: u64) -> Result<LinkRecord> {
    let mut rng = SeededRng::substream(seed, index);
    let gnb = if rng.uniform() < cfg.dedicated_fraction {
        GnbType::Dedicated
    } else {
        GnbType::Standard
    };
    let h = cfg.altitudes_m[rng.below(cfg.altitudes_m.len())];
    let d2d = rng.uniform_range(cfg.d2d_min_m, cfg.d2d_max_m);
    let phi = rng.uniform_range(-core::f64::consts::PI, core::f64::consts::PI);
    let (s, c) = fmath::sincos(phi);
    let u = LinkCondition::new(d2d * c, d2d * s, h - gnb_height_m(gnb), gnb);
    let d3d = u.checked_d3d()?;

    let state = if rng.uniform() < cfg.plos(gnb, h, d2d) {
        LinkState::Los
    } else if rng.uniform() < cfg.nolink_prob(d3d) {
        LinkState::NoLink
    } else {
        LinkState::Nlos
    };
    let paths = match state {
        LinkState::NoLink => PathSet::empty(),
        LinkState::Los => {
            let mut v = Vec::with_capacity(K_PATHS);
            v.push(los_geometry(u.displacement(), cfg.carrier_hz)?.entry());
            v.extend(nlos_paths(cfg, &u, true, &mut rng)?);
            PathSet::from_present(&v)
        }
        LinkState::Nlos => PathSet::from_present(&nlos_paths(cfg, &u, false, &mut rng)?),
    };
    debug_assert!(paths.present().all(|p| p.loss_db < MAX_LOSS_DB));
    Ok(LinkRecord {
        env_id: cfg.env_id.clone(),
        condition: u,
        paths,
    })
}

pub fn generate_city(cfg: &OracleConfig, n_links: usize, seed: u64) -> Result<Dataset> {
    cfg.validate()?;
    let records = (0..n_links as u64)
        .map(|i| generate_link(cfg, seed, i))
        .collect::<Result<Vec<_>>>()?;
    Dataset::new(records, cfg.carrier_hz)
}

/// Seeded shuffle, then the first `round(fraction·n)` links train.
pub fn split(data: &Dataset, fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    if !(0.0..=1.0).contains(&fraction) {
        return Err(Error::InvalidArgument("split fraction must lie in [0, 1]".into()));
    }
    let mut idx: Vec<usize> = (0..data.len()).collect();
    SeededRng::new(seed).shuffle(&mut idx);
    let n_train = fmath::floor(fraction * data.len() as f64 + 0.5) as usize;
    let pick = |ids: &[usize]| ids.iter().map(|&i| data.records[i].clone()).collect::<Vec<_>>();
    Ok((
        Dataset::new(pick(&idx[..n_train]), data.carrier_hz)?,
        Dataset::new(pick(&idx[n_train..]), data.carrier_hz)?,
    ))
}
