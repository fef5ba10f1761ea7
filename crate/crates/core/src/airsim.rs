//! Link-budget SNR with uniform planar arrays, and the single-cell SNR map.
//!
//! Directions are unit vectors pointing away from an array toward where a path
//! leaves or arrives: the departure direction at the UAV and the arrival
//! direction at the gNB. Path powers add non-coherently.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::domain::{GnbType, LinkCondition, PathSet};
use crate::error::{Error, Result};
use crate::fmath;
use crate::genmodel::{GenerativeModel, LatentDraw};
use crate::gpp::gnb_height_m;
use crate::numerics::SeededRng;
use crate::pathcodec::unit_vector;

type Vec3 = [f64; 3];

fn dot(a: &Vec3, b: &Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn cross(a: &Vec3, b: &Vec3) -> Vec3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn normalize(v: Vec3) -> Vec3 {
    let n = fmath::sqrt(dot(&v, &v));
    [v[0] / n, v[1] / n, v[2] / n]
}

/// A uniform planar array of directional elements.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArrayConfig {
    pub rows: usize,
    pub cols: usize,
    /// Element spacing in wavelengths.
    pub spacing_wl: f64,
    pub boresight_az_deg: f64,
    /// Boresight zenith angle: 0 faces up, 180 faces down.
    pub boresight_el_deg: f64,
    /// Full half-power beamwidths of one element.
    pub hpbw_az_deg: f64,
    pub hpbw_el_deg: f64,
    /// Maximum attenuation of the element pattern.
    pub front_back_db: f64,
}

impl ArrayConfig {
    fn panel(rows: usize, cols: usize, az: f64, el: f64) -> Self {
        ArrayConfig {
            rows,
            cols,
            spacing_wl: 0.5,
            boresight_az_deg: az,
            boresight_el_deg: el,
            hpbw_az_deg: 65.0,
            hpbw_el_deg: 65.0,
            front_back_db: 30.0,
        }
    }

    /// 4×4 panel facing straight down.
    pub fn uav() -> Self {
        Self::panel(4, 4, 0.0, 180.0)
    }

    /// 8×8 panels of a gNB: three sectors tilted 10° below the horizon for a
    /// street-level gNB, one panel facing up for a rooftop gNB.
    pub fn gnb_sectors(gnb: GnbType) -> Vec<Self> {
        match gnb {
            GnbType::Standard => [0.0, 120.0, 240.0]
                .iter()
                .map(|az| Self::panel(8, 8, *az, 100.0))
                .collect(),
            GnbType::Dedicated => alloc::vec![Self::panel(8, 8, 0.0, 0.0)],
        }
    }

    pub fn n_elements(&self) -> usize {
        self.rows * self.cols
    }

    pub fn validate(&self) -> Result<()> {
        if self.rows == 0 || self.cols == 0 || !(self.spacing_wl > 0.0) {
            return Err(Error::InvalidArgument("array needs positive size and spacing".into()));
        }
        if !(self.hpbw_az_deg > 0.0 && self.hpbw_el_deg > 0.0 && self.front_back_db >= 0.0) {
            return Err(Error::InvalidArgument("element pattern parameters must be positive".into()));
        }
        Ok(())
    }

    /// Orthonormal frame `(boresight, horizontal axis, vertical axis)`. For a
    /// panel facing straight up or down the vertical axis is pinned to +x.
    fn frame(&self) -> [Vec3; 3] {
        let b = unit_vector(self.boresight_az_deg, self.boresight_el_deg);
        let reference = if b[2].abs() > 1.0 - 1e-12 { [1.0, 0.0, 0.0] } else { [0.0, 0.0, 1.0] };
        let r = dot(&reference, &b);
        let up = normalize([
            reference[0] - r * b[0],
            reference[1] - r * b[1],
            reference[2] - r * b[2],
        ]);
        let side = cross(&up, &b);
        [b, side, up]
    }
}

/// Element gain in dB relative to the boresight peak.
pub fn element_gain(cfg: &ArrayConfig, direction: Vec3) -> f64 {
    let [b, side, up] = cfg.frame();
    let v = normalize(direction);
    let d_az = fmath::atan2(dot(&v, &side), dot(&v, &b)).to_degrees();
    let d_el = fmath::asin(dot(&v, &up).clamp(-1.0, 1.0)).to_degrees();
    let att = 12.0 * (d_el / cfg.hpbw_el_deg) * (d_el / cfg.hpbw_el_deg)
        + 12.0 * (d_az / cfg.hpbw_az_deg) * (d_az / cfg.hpbw_az_deg);
    -att.min(cfg.front_back_db)
}

/// Power array factor `|Σ_n e^{j2π r_n·(u_path − u_steer)}|² / N` of a
/// conjugate-steered array, linear scale.
fn array_factor(cfg: &ArrayConfig, steer: &[f64; 2], path: &[f64; 2]) -> f64 {
    let line = |n: usize, delta: f64| {
        let (mut re, mut im) = (0.0, 0.0);
        for i in 0..n {
            let (s, c) = fmath::sincos(2.0 * core::f64::consts::PI * cfg.spacing_wl * i as f64 * delta);
            re += c;
            im += s;
        }
        re * re + im * im
    };
    line(cfg.cols, path[0] - steer[0]) * line(cfg.rows, path[1] - steer[1]) / cfg.n_elements() as f64
}

/// Direction projected on the array plane.
fn plane_coords(cfg: &ArrayConfig, v: Vec3) -> [f64; 2] {
    let [_, side, up] = cfg.frame();
    [dot(&v, &side), dot(&v, &up)]
}

/// Array gain toward `path_direction` when steered to `steer_direction`, plus
/// the element gain toward the path, in dB.
pub fn beamforming_gain(cfg: &ArrayConfig, steer_direction: Vec3, path_direction: Vec3) -> f64 {
    let af = array_factor(
        cfg,
        &plane_coords(cfg, normalize(steer_direction)),
        &plane_coords(cfg, normalize(path_direction)),
    );
    fmath::db(af) + element_gain(cfg, path_direction)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LinkBudget {
    pub carrier_hz: f64,
    pub bandwidth_hz: f64,
    pub tx_power_dbm: f64,
    /// Noise figure and other losses.
    pub losses_db: f64,
}

impl Default for LinkBudget {
    fn default() -> Self {
        LinkBudget {
            carrier_hz: 28e9,
            bandwidth_hz: 400e6,
            tx_power_dbm: 23.0,
            losses_db: 6.0,
        }
    }
}

impl LinkBudget {
    pub fn noise_dbm(&self) -> f64 {
        -174.0 + fmath::db(self.bandwidth_hz) + self.losses_db
    }
}

/// Per-path directions projected on each array, computed once per link.
struct PathView {
    loss_db: f64,
    uav_elem_db: f64,
    gnb_elem_db: f64,
    uav_p: [f64; 2],
    gnb_p: [f64; 2],
}

/// Local-average SNR in dB, or `-inf` for a link without paths.
///
/// For every gNB panel, both arrays are steered at each path in turn and the
/// pair of beams with the largest total received power is kept; the best
/// panel wins. Taking the maximum over all paths means adding a path can never
/// lower the SNR.
pub fn link_snr(paths: &PathSet, budget: &LinkBudget, uav: &ArrayConfig, gnb_panels: &[ArrayConfig]) -> f64 {
    if paths.n_present() == 0 || gnb_panels.is_empty() {
        return f64::NEG_INFINITY;
    }
    let mut best = f64::NEG_INFINITY;
    for panel in gnb_panels {
        let views: Vec<PathView> = paths
            .present()
            .map(|p| {
                let tx = unit_vector(p.aod_az_deg, p.aod_el_deg);
                let rx = unit_vector(p.aoa_az_deg, p.aoa_el_deg);
                PathView {
                    loss_db: p.loss_db,
                    uav_elem_db: element_gain(uav, tx),
                    gnb_elem_db: element_gain(panel, rx),
                    uav_p: plane_coords(uav, tx),
                    gnb_p: plane_coords(panel, rx),
                }
            })
            .collect();
        // powers relative to the strongest path to stay in range
        let ref_db = views.iter().map(|v| v.loss_db).fold(f64::INFINITY, f64::min);
        for s in &views {
            let total: f64 = views
                .iter()
                .map(|v| {
                    array_factor(uav, &s.uav_p, &v.uav_p)
                        * array_factor(panel, &s.gnb_p, &v.gnb_p)
                        * fmath::undb(v.uav_elem_db + v.gnb_elem_db - (v.loss_db - ref_db))
                })
                .sum();
            let snr = budget.tx_power_dbm + fmath::db(total) - ref_db - budget.noise_dbm();
            if snr > best {
                best = snr;
            }
        }
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SnrMapSpec {
    pub gnb_type: GnbType,
    pub x_min_m: f64,
    pub x_max_m: f64,
    pub x_step_m: f64,
    pub z_min_m: f64,
    pub z_max_m: f64,
    pub z_step_m: f64,
    pub n_realizations: usize,
    /// SNR assigned to NoLink realizations before taking the median.
    pub floor_db: f64,
    pub seed: u64,
}

impl Default for SnrMapSpec {
    fn default() -> Self {
        SnrMapSpec {
            gnb_type: GnbType::Standard,
            x_min_m: 0.0,
            x_max_m: 500.0,
            x_step_m: 10.0,
            z_min_m: 0.0,
            z_max_m: 130.0,
            z_step_m: 10.0,
            n_realizations: 100,
            floor_db: -40.0,
            seed: 5,
        }
    }
}

fn axis(lo: f64, hi: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0) || !(hi >= lo) {
        return Err(Error::InvalidArgument("grid axis needs lo ≤ hi and a positive step".into()));
    }
    let n = fmath::floor((hi - lo) / step + 1e-9) as usize + 1;
    Ok((0..n).map(|i| lo + i as f64 * step).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnrMap {
    pub x_m: Vec<f64>,
    pub z_m: Vec<f64>,
    /// Median SNR at `(x_m[i], z_m[j])` stored at `j * x_m.len() + i`. Points
    /// within 1 m of the gNB are NaN.
    pub median_snr_db: Vec<f64>,
}

impl SnrMap {
    pub fn at(&self, ix: usize, iz: usize) -> f64 {
        self.median_snr_db[iz * self.x_m.len() + ix]
    }
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Median SNR over model realizations on a vertical slice: gNB at `(0, 0, h)`
/// and the UAV at `(x, 0, z)`. Grid point `p` (row-major over z, then x) draws
/// its realizations from substream `p` of the seed.
pub fn snr_map(model: &GenerativeModel, spec: &SnrMapSpec, budget: &LinkBudget) -> Result<SnrMap> {
    if spec.n_realizations == 0 {
        return Err(Error::InvalidArgument("need at least one realization".into()));
    }
    let x_m = axis(spec.x_min_m, spec.x_max_m, spec.x_step_m)?;
    let z_m = axis(spec.z_min_m, spec.z_max_m, spec.z_step_m)?;
    let uav = ArrayConfig::uav();
    let panels = ArrayConfig::gnb_sectors(spec.gnb_type);
    let h = gnb_height_m(spec.gnb_type);
    let mut out = Vec::with_capacity(x_m.len() * z_m.len());
    let mut snrs = Vec::with_capacity(spec.n_realizations);
    for (iz, z) in z_m.iter().enumerate() {
        for (ix, x) in x_m.iter().enumerate() {
            let u = LinkCondition::new(*x, 0.0, z - h, spec.gnb_type);
            if u.d3d() < 1.0 {
                out.push(f64::NAN);
                continue;
            }
            let mut rng = SeededRng::substream(spec.seed, (iz * x_m.len() + ix) as u64);
            snrs.clear();
            for _ in 0..spec.n_realizations {
                let paths = model.generate_link(&u, &LatentDraw::sample(&mut rng))?;
                let s = link_snr(&paths, budget, &uav, &panels);
                snrs.push(if s.is_finite() { s } else { spec.floor_db });
            }
            out.push(median(&mut snrs));
        }
    }
    Ok(SnrMap {
        x_m,
        z_m,
        median_snr_db: out,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::PathEntry;
    use crate::pathcodec::{friis_loss, los_geometry};
    use proptest::prelude::*;

    #[test]
    fn noise_power() {
        assert!((LinkBudget::default().noise_dbm() - (-81.98)).abs() < 0.01);
    }

    #[test]
    fn element_pattern() {
        let cfg = ArrayConfig::panel(1, 1, 30.0, 100.0);
        let b = unit_vector(30.0, 100.0);
        assert!(element_gain(&cfg, b).abs() < 1e-12);
        // half the full beamwidth off boresight, in azimuth
        let half = unit_vector(30.0 + 32.5 / (100f64.to_radians().sin()), 100.0);
        let g = element_gain(&cfg, half);
        assert!(g < -2.0 && g > -4.0, "{g}");
        assert_eq!(element_gain(&cfg, [-b[0], -b[1], -b[2]]), -30.0);
        // exactly half-power in elevation
        let up = ArrayConfig::panel(1, 1, 0.0, 90.0);
        assert!((element_gain(&up, unit_vector(0.0, 90.0 - 32.5)) + 3.0).abs() < 1e-9);
    }

    #[test]
    fn boresight_array_gains() {
        let g8 = ArrayConfig::panel(8, 8, 0.0, 0.0);
        let b = unit_vector(0.0, 0.0);
        assert!((beamforming_gain(&g8, b, b) - 64f64.log10() * 10.0).abs() < 1e-9);
        assert!((beamforming_gain(&g8, b, b) - 18.06).abs() < 0.01);
        let u4 = ArrayConfig::uav();
        let d = unit_vector(0.0, 180.0);
        assert!((beamforming_gain(&u4, d, d) - 12.04).abs() < 0.01);
    }

    #[test]
    fn first_null_of_linear_array() {
        // 8 elements at λ/2: first null where the phase span reaches 2π, i.e. sin θ = 2/8
        let cfg = ArrayConfig { rows: 1, cols: 8, ..ArrayConfig::panel(1, 8, 0.0, 90.0) };
        let b = unit_vector(0.0, 90.0);
        let az = (0.25f64).asin().to_degrees();
        let af = array_factor(&cfg, &plane_coords(&cfg, b), &plane_coords(&cfg, unit_vector(az, 90.0)));
        assert!(af < 1e-20, "{af}");
        let af_half = array_factor(&cfg, &plane_coords(&cfg, b), &plane_coords(&cfg, unit_vector(az / 2.0, 90.0)));
        assert!(af_half > 0.1);
    }

    fn vertical_los() -> (LinkCondition, PathSet) {
        // rooftop gNB looking up, UAV 100 m straight above looking down
        let u = LinkCondition::new(0.0, 0.0, 100.0, GnbType::Dedicated);
        let los = los_geometry(u.displacement(), 28e9).unwrap().entry();
        (u, PathSet::from_present(&[los]))
    }

    #[test]
    fn single_los_budget() {
        let (_, ps) = vertical_los();
        let snr = link_snr(&ps, &LinkBudget::default(), &ArrayConfig::uav(), &ArrayConfig::gnb_sectors(GnbType::Dedicated));
        let expect = 23.0 - friis_loss(100.0, 28e9).unwrap() + 64f64.log10() * 10.0 + 16f64.log10() * 10.0 - LinkBudget::default().noise_dbm();
        assert!((snr - expect).abs() < 1e-9);
        assert!((snr - 33.69).abs() < 0.05, "{snr}");
        assert_eq!(
            link_snr(&PathSet::empty(), &LinkBudget::default(), &ArrayConfig::uav(), &ArrayConfig::gnb_sectors(GnbType::Standard)),
            f64::NEG_INFINITY
        );
    }

    fn arb_path() -> impl Strategy<Value = PathEntry> {
        (60.0f64..180.0, -179.0f64..180.0, 0.0f64..180.0, -179.0f64..180.0, 0.0f64..180.0).prop_map(
            |(loss, a1, e1, a2, e2)| PathEntry {
                loss_db: loss,
                aoa_az_deg: a1,
                aoa_el_deg: e1,
                aod_az_deg: a2,
                aod_el_deg: e2,
                delay_s: 1e-6,
                is_los: false,
            },
        )
    }

    proptest! {
        #[test]
        fn snr_monotone_and_order_invariant(paths in prop::collection::vec(arb_path(), 1..8), extra in arb_path()) {
            let budget = LinkBudget::default();
            let uav = ArrayConfig::uav();
            let panels = ArrayConfig::gnb_sectors(GnbType::Standard);
            let base = link_snr(&PathSet::from_present(&paths), &budget, &uav, &panels);
            let mut rev = paths.clone();
            rev.reverse();
            let r = link_snr(&PathSet::from_present(&rev), &budget, &uav, &panels);
            prop_assert!((base - r).abs() < 1e-9);
            let mut more = paths.clone();
            more.push(extra);
            prop_assert!(link_snr(&PathSet::from_present(&more), &budget, &uav, &panels) >= base - 1e-12);
        }
    }

    #[test]
    fn medians() {
        assert_eq!(median(&mut [3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&mut [4.0, 1.0, 2.0, 3.0]), 2.5);
        assert_eq!(axis(0.0, 130.0, 10.0).unwrap().len(), 14);
        assert!(axis(0.0, 1.0, 0.0).is_err());
    }
}
