//! Evaluation statistics: omnidirectional path loss, Wasserstein-1 distance,
//! binned LOS-probability error and LOS-relative angular distributions.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::domain::{Dataset, GnbType, LinkCondition, LinkState, PathSet};
use crate::error::{Error, Result};
use crate::fmath;
use crate::pathcodec::los_geometry;

/// How path powers combine into one omnidirectional loss.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OmniMode {
    /// Total received power over all present paths.
    #[default]
    PowerSum,
    /// Loss of the strongest path only.
    Strongest,
}

pub fn omni_pathloss(paths: &PathSet, mode: OmniMode) -> Result<f64> {
    let min = paths
        .min_loss_db()
        .ok_or(Error::InvalidArgument("omnidirectional loss of a link with no paths".into()))?;
    Ok(match mode {
        OmniMode::Strongest => min,
        OmniMode::PowerSum => {
            // factor out the strongest path for accuracy
            let rel: f64 = paths.present().map(|p| fmath::undb(min - p.loss_db)).sum();
            min - fmath::db(rel)
        }
    })
}

/// Omnidirectional losses of every link that has at least one path.
pub fn omni_pathloss_samples<'a, I>(paths: I, mode: OmniMode) -> Vec<f64>
where
    I: IntoIterator<Item = &'a PathSet>,
{
    paths
        .into_iter()
        .filter_map(|p| omni_pathloss(p, mode).ok())
        .collect()
}

/// Sorted, nonempty, NaN-free observations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CdfSamples {
    values: Vec<f64>,
}

impl CdfSamples {
    pub fn new(mut values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Empty("CDF samples"));
        }
        if values.iter().any(|v| v.is_nan()) {
            return Err(Error::InvalidArgument("NaN in CDF samples".into()));
        }
        values.sort_by(f64::total_cmp);
        Ok(CdfSamples { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `(value, cumulative fraction)` per sample; the last fraction is 1.
    pub fn points(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        let n = self.values.len() as f64;
        self.values
            .iter()
            .enumerate()
            .map(move |(i, v)| (*v, (i + 1) as f64 / n))
    }

    pub fn quantile(&self, q: f64) -> f64 {
        quantile_sorted(&self.values, q)
    }
}

/// Linear-interpolation quantile of sorted data.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = fmath::floor(pos) as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Integral of `|F_p − F_q|` over the merged support.
pub fn wasserstein1(p: &CdfSamples, q: &CdfSamples) -> f64 {
    let (a, b) = (&p.values, &q.values);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut prev = a[0].min(b[0]);
    let mut total = 0.0;
    while i < a.len() || j < b.len() {
        let x = match (a.get(i), b.get(j)) {
            (Some(&x), Some(&y)) => x.min(y),
            (Some(&x), None) => x,
            (None, Some(&y)) => y,
            (None, None) => break,
        };
        total += (i as f64 / na - j as f64 / nb).abs() * (x - prev);
        while i < a.len() && a[i] == x {
            i += 1;
        }
        while j < b.len() && b[j] == x {
            j += 1;
        }
        prev = x;
    }
    total
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSpec {
    pub d2d_bin_m: f64,
    pub dz_bin_m: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            d2d_bin_m: 20.0,
            dz_bin_m: 5.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridBin {
    pub gnb_type: GnbType,
    pub d2d_center_m: f64,
    pub dz_center_m: f64,
    pub n_links: usize,
    pub n_los: usize,
    pub model_p_los: f64,
}

impl GridBin {
    pub fn empirical_p_los(&self) -> f64 {
        self.n_los as f64 / self.n_links as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridMae {
    pub mae: f64,
    /// Nonempty bins in (type, d2D, dz) order.
    pub bins: Vec<GridBin>,
}

/// Bins test links by gNB type, horizontal distance and height difference and
/// averages `|empirical − model|` over nonempty bins, with the model evaluated
/// at each bin center.
pub fn plos_grid_mae<F>(mut model_p_los: F, test: &Dataset, grid: &GridSpec) -> Result<GridMae>
where
    F: FnMut(&LinkCondition) -> Result<f64>,
{
    if !(grid.d2d_bin_m > 0.0 && grid.dz_bin_m > 0.0) {
        return Err(Error::InvalidArgument("grid bin widths must be positive".into()));
    }
    if test.is_empty() {
        return Err(Error::Empty("grid MAE test data"));
    }
    let mut counts: BTreeMap<(usize, i64, i64), (usize, usize)> = BTreeMap::new();
    for r in &test.records {
        let c = &r.condition;
        let key = (
            c.gnb_type as usize,
            fmath::floor(c.d2d() / grid.d2d_bin_m) as i64,
            fmath::floor(c.dz_m / grid.dz_bin_m) as i64,
        );
        let e = counts.entry(key).or_insert((0, 0));
        e.0 += 1;
        if r.state() == LinkState::Los {
            e.1 += 1;
        }
    }
    let mut bins = Vec::with_capacity(counts.len());
    let mut total = 0.0;
    for ((g, ix, iz), (n_links, n_los)) in counts {
        let gnb_type = GnbType::ALL[g];
        let d2d_center_m = (ix as f64 + 0.5) * grid.d2d_bin_m;
        let dz_center_m = (iz as f64 + 0.5) * grid.dz_bin_m;
        let model = model_p_los(&LinkCondition::new(d2d_center_m, 0.0, dz_center_m, gnb_type))?;
        let bin = GridBin {
            gnb_type,
            d2d_center_m,
            dz_center_m,
            n_links,
            n_los,
            model_p_los: model,
        };
        total += (bin.empirical_p_los() - model).abs();
        bins.push(bin);
    }
    Ok(GridMae {
        mae: total / bins.len() as f64,
        bins,
    })
}

/// Angle names in histogram order.
pub const ANGLE_NAMES: [&str; 4] = ["aoa_az", "aoa_el", "aod_az", "aod_el"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AngularSpec {
    /// Distance-bin edges in meters, ascending.
    pub d3d_edges_m: Vec<f64>,
    pub angle_bin_deg: f64,
    /// Paths weaker than the strongest by more than this are dropped.
    pub threshold_db: f64,
}

impl Default for AngularSpec {
    fn default() -> Self {
        AngularSpec {
            d3d_edges_m: vec![0.0, 100.0, 200.0, 300.0, 400.0, 600.0],
            angle_bin_deg: 10.0,
            threshold_db: 30.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AngularDistribution {
    pub d3d_edges_m: Vec<f64>,
    pub angle_edges_deg: Vec<f64>,
    /// `hist[angle][distance_bin][angle_bin]`, each distance row summing to 1
    /// (or all zero when the bin holds no paths).
    pub hist: Vec<Vec<Vec<f64>>>,
    /// Interquartile range of the relative angle, `iqr[angle][distance_bin]`.
    pub iqr_deg: Vec<Vec<Option<f64>>>,
    pub n_paths: Vec<usize>,
}

/// LOS-relative angles, in degrees, of the paths within `threshold_db` of the
/// strongest path: `[aoa_az, aoa_el, aod_az, aod_el]` per kept path.
pub fn relative_angles(paths: &PathSet, u: &LinkCondition, threshold_db: f64) -> Result<Vec<[f64; 4]>> {
    let Some(min) = paths.min_loss_db() else {
        return Ok(Vec::new());
    };
    let los = los_geometry(u.displacement(), 1.0)?;
    Ok(paths
        .present()
        .filter(|p| p.loss_db <= min + threshold_db)
        .map(|p| {
            [
                fmath::wrap_deg(p.aoa_az_deg - los.aoa_az_deg),
                fmath::wrap_deg(p.aoa_el_deg - los.aoa_el_deg),
                fmath::wrap_deg(p.aod_az_deg - los.aod_az_deg),
                fmath::wrap_deg(p.aod_el_deg - los.aod_el_deg),
            ]
        })
        .collect())
}

/// Histograms of LOS-relative angles per 3D-distance bin. Links farther than
/// the last edge are ignored.
pub fn angular_distribution<'a, I>(links: I, spec: &AngularSpec) -> Result<AngularDistribution>
where
    I: IntoIterator<Item = (&'a LinkCondition, &'a PathSet)>,
{
    let edges = &spec.d3d_edges_m;
    if edges.len() < 2 || edges.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidArgument("distance edges must be ascending".into()));
    }
    if !(spec.angle_bin_deg > 0.0) {
        return Err(Error::InvalidArgument("angle bin width must be positive".into()));
    }
    let n_d = edges.len() - 1;
    let n_a = fmath::floor(360.0 / spec.angle_bin_deg) as usize;
    let n_a = n_a.max(1);
    let mut samples: Vec<Vec<Vec<f64>>> = vec![vec![Vec::new(); n_d]; 4];
    for (u, paths) in links {
        let d = u.checked_d3d()?;
        let Some(bin) = edges.windows(2).position(|w| d >= w[0] && d < w[1]) else {
            continue;
        };
        for angles in relative_angles(paths, u, spec.threshold_db)? {
            for k in 0..4 {
                samples[k][bin].push(angles[k]);
            }
        }
    }
    let width = 360.0 / n_a as f64;
    let angle_edges_deg = (0..=n_a).map(|i| -180.0 + i as f64 * width).collect();
    let mut hist = vec![vec![vec![0.0; n_a]; n_d]; 4];
    let mut iqr_deg = vec![vec![None; n_d]; 4];
    for k in 0..4 {
        for b in 0..n_d {
            let s = &mut samples[k][b];
            if s.is_empty() {
                continue;
            }
            for &a in s.iter() {
                let i = (fmath::floor((a + 180.0) / width) as usize).min(n_a - 1);
                hist[k][b][i] += 1.0;
            }
            let n = s.len() as f64;
            hist[k][b].iter_mut().for_each(|h| *h /= n);
            s.sort_by(f64::total_cmp);
            iqr_deg[k][b] = Some(quantile_sorted(s, 0.75) - quantile_sorted(s, 0.25));
        }
    }
    let n_paths = samples[0].iter().map(Vec::len).collect();
    Ok(AngularDistribution {
        d3d_edges_m: edges.clone(),
        angle_edges_deg,
        hist,
        iqr_deg,
        n_paths,
    })
}
