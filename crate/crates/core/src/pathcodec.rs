//! Mapping between raw NLOS path parameters and the normalized 120-vector the
//! VAE works on, plus the deterministic LOS path.
//!
//! Layout of the normalized vector: 20 consecutive blocks (one per path slot) of
//! `[gain, rel_aoa_az, rel_aoa_el, rel_aod_az, rel_aod_el, excess_delay]`.
//!
//! - `gain` is `200 − loss_db` min-max scaled with the lower limit pinned at 0,
//!   so 0 means an absent path;
//! - angles are taken relative to the LOS direction (whether or not the LOS path
//!   exists) and divided by 180°;
//! - `excess_delay` is the delay beyond the LOS delay, clamped at 0 and min-max
//!   scaled with the lower limit pinned at 0.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::domain::{LinkCondition, LinkState, PathEntry, PathSet, K_PATHS, MAX_LOSS_DB};
use crate::error::{check_len, Error, Result};
use crate::fmath;
use crate::numerics::MinMaxScaler;
use crate::{Dataset, SPEED_OF_LIGHT};

/// Parameters per path block.
pub const BLOCK: usize = 6;
/// Length of the normalized NLOS vector.
pub const Y_DIM: usize = K_PATHS * BLOCK;
/// Normalized gain at or below which a generated block is treated as absent.
pub const DEFAULT_ABSENT_EPS: f64 = 0.01;

const ANGLE_SCALE_DEG: f64 = 180.0;

/// Free-space loss `20·log10(4π·d·f/c)` in dB.
pub fn friis_loss(d3d_m: f64, f_hz: f64) -> Result<f64> {
    if !(d3d_m > 0.0) || !(f_hz > 0.0) {
        return Err(Error::InvalidArgument(alloc::format!(
            "friis loss needs positive distance and frequency, got {d3d_m} m, {f_hz} Hz"
        )));
    }
    Ok(20.0 * fmath::log10(4.0 * core::f64::consts::PI * d3d_m * f_hz / SPEED_OF_LIGHT))
}

/// Azimuth in (−180, 180] and zenith elevation in [0, 180] of a nonzero vector,
/// in degrees. A vertical vector gets azimuth 0.
pub fn direction_angles(v: [f64; 3]) -> (f64, f64) {
    let horiz = fmath::sqrt(v[0] * v[0] + v[1] * v[1]);
    let r = fmath::sqrt(horiz * horiz + v[2] * v[2]);
    let az = if horiz > 0.0 {
        fmath::wrap_deg(fmath::atan2(v[1], v[0]).to_degrees())
    } else {
        0.0
    };
    let el = fmath::acos((v[2] / r).clamp(-1.0, 1.0)).to_degrees();
    (az, el)
}

/// Unit vector for an azimuth / zenith-elevation pair in degrees.
pub fn unit_vector(az_deg: f64, el_deg: f64) -> [f64; 3] {
    let (sa, ca) = fmath::sincos(az_deg.to_radians());
    let (se, ce) = fmath::sincos(el_deg.to_radians());
    [se * ca, se * sa, ce]
}

/// Reflect an elevation that overshot [0, 180] back into range.
pub fn fold_elevation(el: f64) -> f64 {
    if el > 180.0 {
        360.0 - el
    } else if el < 0.0 {
        -el
    } else {
        el
    }
}

/// Direct-path parameters of a link. Departure is from the UAV toward the gNB
/// (direction `−d`); arrival at the gNB is from the UAV (direction `+d`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LosGeometry {
    pub aod_az_deg: f64,
    pub aod_el_deg: f64,
    pub aoa_az_deg: f64,
    pub aoa_el_deg: f64,
    pub tau_s: f64,
    pub loss_db: f64,
}

impl LosGeometry {
    pub fn entry(&self) -> PathEntry {
        PathEntry {
            loss_db: self.loss_db,
            aoa_az_deg: self.aoa_az_deg,
            aoa_el_deg: self.aoa_el_deg,
            aod_az_deg: self.aod_az_deg,
            aod_el_deg: self.aod_el_deg,
            delay_s: self.tau_s,
            is_los: true,
        }
    }
}

pub fn los_geometry(d: [f64; 3], f_hz: f64) -> Result<LosGeometry> {
    let d3d = fmath::sqrt(d[0] * d[0] + d[1] * d[1] + d[2] * d[2]);
    if !(d3d > 0.0) || !d3d.is_finite() {
        return Err(Error::ZeroDisplacement);
    }
    let (aoa_az_deg, aoa_el_deg) = direction_angles(d);
    let (aod_az_deg, aod_el_deg) = direction_angles([-d[0], -d[1], -d[2]]);
    Ok(LosGeometry {
        aod_az_deg,
        aod_el_deg,
        aoa_az_deg,
        aoa_el_deg,
        tau_s: d3d / SPEED_OF_LIGHT,
        loss_db: friis_loss(d3d, f_hz)?,
    })
}

/// Fitted scalers for excess gain and excess delay. Angles use a fixed 1/180 scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CodecScalers {
    pub gain: MinMaxScaler,
    pub delay: MinMaxScaler,
}

fn excess_delay(delay_s: f64, tau_los_s: f64) -> f64 {
    (delay_s - tau_los_s).max(0.0)
}

/// Fits the gain and delay scalers on the NLOS paths of a training set.
pub fn fit_codec_scalers(train: &Dataset) -> Result<CodecScalers> {
    let mut gains = Vec::new();
    let mut delays = Vec::new();
    for rec in &train.records {
        let tau = rec.condition.checked_d3d()? / SPEED_OF_LIGHT;
        for p in rec.paths.present().filter(|p| !p.is_los) {
            gains.push([MAX_LOSS_DB - p.loss_db]);
            delays.push([excess_delay(p.delay_s, tau)]);
        }
    }
    if gains.is_empty() {
        return Err(Error::Empty("training data has no NLOS paths"));
    }
    let pin = [Some(0.0)];
    Ok(CodecScalers {
        gain: MinMaxScaler::fit(gains.iter().map(|g| &g[..]), Some(&pin))?,
        delay: MinMaxScaler::fit(delays.iter().map(|d| &d[..]), Some(&pin))?,
    })
}

/// Encodes the NLOS paths of a link. `paths` must not contain the LOS entry.
pub fn encode_nlos(paths: &PathSet, u: &LinkCondition, scalers: &CodecScalers) -> Result<Vec<f64>> {
    if paths.entries.iter().any(|p| p.is_los && p.is_present()) {
        return Err(Error::InvalidArgument("encode_nlos expects the LOS path removed".into()));
    }
    let los = los_geometry(u.displacement(), 1.0)?;
    let mut y = vec![0.0; Y_DIM];
    for (block, p) in y.chunks_mut(BLOCK).zip(paths.entries.iter()) {
        if !p.is_present() {
            continue;
        }
        block[0] = scalers.gain.apply_component(0, MAX_LOSS_DB - p.loss_db);
        block[1] = fmath::wrap_deg(p.aoa_az_deg - los.aoa_az_deg) / ANGLE_SCALE_DEG;
        block[2] = fmath::wrap_deg(p.aoa_el_deg - los.aoa_el_deg) / ANGLE_SCALE_DEG;
        block[3] = fmath::wrap_deg(p.aod_az_deg - los.aod_az_deg) / ANGLE_SCALE_DEG;
        block[4] = fmath::wrap_deg(p.aod_el_deg - los.aod_el_deg) / ANGLE_SCALE_DEG;
        block[5] = scalers
            .delay
            .apply_component(0, excess_delay(p.delay_s, los.tau_s));
    }
    Ok(y)
}

/// Inverts [`encode_nlos`]. Values are first clipped to their valid ranges;
/// blocks whose gain is at most `absent_eps` become absent paths. Present paths
/// are compacted to the front in slot order.
pub fn decode_nlos(
    y: &[f64],
    u: &LinkCondition,
    scalers: &CodecScalers,
    absent_eps: f64,
) -> Result<PathSet> {
    check_len(Y_DIM, y.len())?;
    let los = los_geometry(u.displacement(), 1.0)?;
    let mut present = Vec::with_capacity(K_PATHS);
    for block in y.chunks(BLOCK) {
        let gain = block[0].clamp(0.0, 1.0);
        if !(gain > absent_eps) {
            continue;
        }
        let angle = |v: f64| v.clamp(-1.0, 1.0) * ANGLE_SCALE_DEG;
        let loss_db = (MAX_LOSS_DB - scalers.gain.invert_component(0, gain)).min(MAX_LOSS_DB);
        if !(loss_db < MAX_LOSS_DB) {
            continue;
        }
        present.push(PathEntry {
            loss_db,
            aoa_az_deg: fmath::wrap_deg(los.aoa_az_deg + angle(block[1])),
            aoa_el_deg: fold_elevation(los.aoa_el_deg + angle(block[2])),
            aod_az_deg: fmath::wrap_deg(los.aod_az_deg + angle(block[3])),
            aod_el_deg: fold_elevation(los.aod_el_deg + angle(block[4])),
            delay_s: los.tau_s + scalers.delay.invert_component(0, block[5].clamp(0.0, 1.0)),
            is_los: false,
        });
    }
    Ok(PathSet::from_present(&present))
}

/// Adds the deterministic LOS path for a LOS link (dropping the weakest NLOS
/// path if all slots are taken), passes NLOS links through and empties NoLink
/// links.
pub fn assemble_full_pathset(
    nlos: &PathSet,
    state: LinkState,
    u: &LinkCondition,
    f_hz: f64,
) -> Result<PathSet> {
    if nlos.entries.iter().any(|p| p.is_los && p.is_present()) {
        return Err(Error::InvalidArgument("NLOS path set already holds a LOS path".into()));
    }
    let mut paths: Vec<PathEntry> = nlos.present().copied().collect();
    match state {
        LinkState::NoLink => Ok(PathSet::empty()),
        LinkState::Nlos => Ok(PathSet::from_present(&paths)),
        LinkState::Los => {
            if paths.len() >= K_PATHS {
                let weakest = paths
                    .iter()
                    .enumerate()
                    .max_by(|a, b| a.1.loss_db.total_cmp(&b.1.loss_db))
                    .map(|(i, _)| i)
                    .unwrap_or(0);
                paths.remove(weakest);
            }
            let los = los_geometry(u.displacement(), f_hz)?.entry();
            let mut full = Vec::with_capacity(K_PATHS);
            full.push(los);
            full.extend(paths);
            Ok(PathSet::from_present(&full))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{validate_record, GnbType, LinkRecord};
    use crate::numerics::SeededRng;
    use alloc::string::ToString;

    const F: f64 = 28e9;

    fn scalers(gmax: f64, dmax: f64) -> CodecScalers {
        CodecScalers {
            gain: MinMaxScaler::from_limits(vec![0.0], vec![gmax]).unwrap(),
            delay: MinMaxScaler::from_limits(vec![0.0], vec![dmax]).unwrap(),
        }
    }

    fn cond(d: [f64; 3]) -> LinkCondition {
        LinkCondition::new(d[0], d[1], d[2], GnbType::Standard)
    }

    #[test]
    fn friis_values() {
        assert!((friis_loss(1.0, F).unwrap() - 61.39).abs() < 0.01);
        assert!((friis_loss(100.0, F).unwrap() - 101.39).abs() < 0.01);
        let diff = friis_loss(10.0, 2.0 * F).unwrap() - friis_loss(10.0, F).unwrap();
        assert!((diff - 20.0 * 2f64.log10()).abs() < 1e-12);
        assert!(friis_loss(0.0, F).is_err());
        assert!(friis_loss(1.0, -1.0).is_err());
    }

    #[test]
    fn friis_strictly_increasing() {
        let mut prev = friis_loss(0.5, F).unwrap();
        for i in 1..200 {
            let d = 0.5 + i as f64 * 3.7;
            let cur = friis_loss(d, F).unwrap();
            assert!(cur > prev);
            prev = cur;
        }
        assert!(friis_loss(10.0, 30e9).unwrap() > friis_loss(10.0, 28e9).unwrap());
    }

    #[test]
    fn vertical_geometry() {
        // UAV 100 m straight above the gNB
        let g = los_geometry([0.0, 0.0, 100.0], F).unwrap();
        assert_eq!(g.aod_el_deg, 180.0);
        assert_eq!(g.aoa_el_deg, 0.0);
        assert!((g.tau_s - 333.564e-9).abs() < 1e-12);
    }

    #[test]
    fn horizontal_geometry() {
        let g = los_geometry([100.0, 0.0, 0.0], F).unwrap();
        assert_eq!(g.aod_az_deg, 180.0);
        assert_eq!(g.aoa_az_deg, 0.0);
        assert_eq!(g.aod_el_deg, 90.0);
        assert_eq!(g.aoa_el_deg, 90.0);
        let g2 = los_geometry([200.0, 0.0, 0.0], F).unwrap();
        assert!((g2.tau_s - 2.0 * g.tau_s).abs() < 1e-20);
        assert!(los_geometry([0.0; 3], F).is_err());
    }

    #[test]
    fn arrival_reverses_departure() {
        let mut rng = SeededRng::new(2);
        for _ in 0..100 {
            let d = [rng.normal() * 100.0, rng.normal() * 100.0, rng.normal() * 100.0];
            let g = los_geometry(d, F).unwrap();
            let a = unit_vector(g.aoa_az_deg, g.aoa_el_deg);
            let b = unit_vector(g.aod_az_deg, g.aod_el_deg);
            for i in 0..3 {
                assert!((a[i] + b[i]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn fit_scalers_from_training_paths() {
        let u = cond([30.0, 40.0, 50.0]);
        let tau = u.d3d() / SPEED_OF_LIGHT;
        let p = |loss, extra_ns: f64| PathEntry {
            loss_db: loss,
            delay_s: tau + extra_ns * 1e-9,
            ..PathEntry::ABSENT
        };
        let rec = LinkRecord {
            env_id: "t".to_string(),
            condition: u,
            paths: PathSet::from_present(&[p(120.0, 0.0), p(80.0, 500.0)]),
        };
        let data = Dataset::new(vec![rec], F).unwrap();
        let s = fit_codec_scalers(&data).unwrap();
        assert_eq!((s.gain.lower[0], s.gain.upper[0]), (0.0, 120.0));
        assert_eq!(s.gain.apply_component(0, MAX_LOSS_DB - 80.0), 1.0);
        assert_eq!(s.gain.apply_component(0, 0.0), 0.0);
        assert!((s.delay.upper[0] - 500e-9).abs() < 1e-15);
        assert!((s.delay.apply_component(0, 250e-9) - 0.5).abs() < 1e-9);

        let empty = Dataset::new(
            vec![LinkRecord {
                env_id: "t".to_string(),
                condition: u,
                paths: PathSet::empty(),
            }],
            F,
        )
        .unwrap();
        assert!(fit_codec_scalers(&empty).is_err());
    }

    #[test]
    fn aligned_and_absent_blocks() {
        let u = cond([100.0, -20.0, 60.0]);
        let los = los_geometry(u.displacement(), F).unwrap();
        let mut aligned = los.entry();
        aligned.is_los = false;
        aligned.loss_db = 130.0;
        let y = encode_nlos(&PathSet::from_present(&[aligned]), &u, &scalers(150.0, 1e-6)).unwrap();
        assert_eq!(&y[1..6], &[0.0; 5]);
        assert_eq!(&y[6..12], &[0.0; 6]);
    }

    #[test]
    fn azimuth_wraps() {
        // LOS arrival azimuth 175°, path 10° beyond it
        let az = 175f64.to_radians();
        let u = cond([100.0 * az.cos(), 100.0 * az.sin(), 0.0]);
        let los = los_geometry(u.displacement(), F).unwrap();
        assert!((los.aoa_az_deg - 175.0).abs() < 1e-9);
        let mut p = los.entry();
        p.is_los = false;
        p.loss_db = 120.0;
        p.aoa_az_deg = fmath::wrap_deg(los.aoa_az_deg + 10.0);
        let y = encode_nlos(&PathSet::from_present(&[p]), &u, &scalers(150.0, 1e-6)).unwrap();
        assert!((y[1] - 10.0 / 180.0).abs() < 1e-9);
        // and in the other sense: 175° relative to a LOS at −10°
        let u2 = cond([100.0 * (-10f64).to_radians().cos(), 100.0 * (-10f64).to_radians().sin(), 0.0]);
        let los2 = los_geometry(u2.displacement(), F).unwrap();
        p.aoa_az_deg = 175.0;
        p.aod_az_deg = los2.aod_az_deg;
        let y2 = encode_nlos(&PathSet::from_present(&[p]), &u2, &scalers(150.0, 1e-6)).unwrap();
        assert!((y2[1] - (-175.0 / 180.0)).abs() < 1e-9, "{}", y2[1]);
    }

    #[test]
    fn encode_rejects_los_entry() {
        let u = cond([10.0, 0.0, 10.0]);
        let los = los_geometry(u.displacement(), F).unwrap().entry();
        assert!(encode_nlos(&PathSet::from_present(&[los]), &u, &scalers(1.0, 1.0)).is_err());
    }

    #[test]
    fn zero_vector_decodes_empty() {
        let u = cond([10.0, 0.0, 10.0]);
        let ps = decode_nlos(&[0.0; Y_DIM], &u, &scalers(120.0, 1e-6), DEFAULT_ABSENT_EPS).unwrap();
        assert_eq!(ps, PathSet::empty());
    }

    #[test]
    fn gain_just_above_eps() {
        let u = cond([10.0, 0.0, 10.0]);
        let mut y = vec![0.0; Y_DIM];
        y[0] = DEFAULT_ABSENT_EPS + 1e-3;
        let ps = decode_nlos(&y, &u, &scalers(120.0, 1e-6), DEFAULT_ABSENT_EPS).unwrap();
        assert_eq!(ps.n_present(), 1);
        let want = 200.0 - 120.0 * (DEFAULT_ABSENT_EPS + 1e-3);
        assert!((ps.entries[0].loss_db - want).abs() < 1e-12);
        y[0] = DEFAULT_ABSENT_EPS;
        let ps = decode_nlos(&y, &u, &scalers(120.0, 1e-6), DEFAULT_ABSENT_EPS).unwrap();
        assert_eq!(ps.n_present(), 0);
    }

    #[test]
    fn decode_clips_out_of_range() {
        let u = cond([50.0, 10.0, 40.0]);
        let mut y = vec![0.0; Y_DIM];
        y[..6].copy_from_slice(&[1.7, 3.0, -4.0, 0.2, 0.1, 9.0]);
        let s = scalers(120.0, 1e-6);
        let ps = decode_nlos(&y, &u, &s, DEFAULT_ABSENT_EPS).unwrap();
        let p = ps.entries[0];
        assert!((p.loss_db - 80.0).abs() < 1e-12);
        let los = los_geometry(u.displacement(), F).unwrap();
        assert!((p.delay_s - (los.tau_s + 1e-6)).abs() < 1e-18);
        let rec = LinkRecord {
            env_id: "t".to_string(),
            condition: u,
            paths: ps,
        };
        assert!(validate_record(&rec).is_valid());
    }

    #[test]
    fn assemble_states() {
        let u = cond([60.0, 0.0, 80.0]);
        let nlos_path = PathEntry {
            loss_db: 120.0,
            aoa_az_deg: 1.0,
            aoa_el_deg: 30.0,
            aod_az_deg: 2.0,
            aod_el_deg: 150.0,
            delay_s: 1e-6,
            is_los: false,
        };
        let nlos = PathSet::from_present(&[nlos_path]);
        assert_eq!(
            assemble_full_pathset(&nlos, LinkState::NoLink, &u, F).unwrap(),
            PathSet::empty()
        );
        assert_eq!(assemble_full_pathset(&nlos, LinkState::Nlos, &u, F).unwrap(), nlos);

        let only = assemble_full_pathset(&PathSet::empty(), LinkState::Los, &u, F).unwrap();
        assert_eq!(only.n_present(), 1);
        assert!(only.entries[0].is_los);
        assert_eq!(only.entries[0].loss_db, friis_loss(100.0, F).unwrap());

        let mut full = [nlos_path; K_PATHS];
        for (i, p) in full.iter_mut().enumerate() {
            p.loss_db = 100.0 + i as f64;
        }
        full.swap(3, 19); // weakest not at the end
        let out = assemble_full_pathset(&PathSet::from_present(&full), LinkState::Los, &u, F).unwrap();
        assert_eq!(out.n_present(), K_PATHS);
        assert!(out.entries[0].is_los);
        assert_eq!(out.entries.iter().filter(|p| p.is_los).count(), 1);
        assert!(out.entries.iter().all(|p| p.loss_db != 119.0));
    }
}
