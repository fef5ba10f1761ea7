//! Link records: path sets, link conditions and link states.
//!
//! Unit conventions used throughout the crate:
//! - losses in dB, with [`MAX_LOSS_DB`] marking an absent path;
//! - azimuths in degrees, (−180, 180];
//! - elevations in degrees measured from zenith, [0, 180];
//! - delays in seconds (nanoseconds only in files);
//! - displacements are UAV position minus gNB position, in meters.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fmath;

/// Number of path slots per link.
pub const K_PATHS: usize = 20;

/// Loss value that encodes an absent path.
pub const MAX_LOSS_DB: f64 = 200.0;

/// One propagation path.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathEntry {
    pub loss_db: f64,
    pub aoa_az_deg: f64,
    pub aoa_el_deg: f64,
    pub aod_az_deg: f64,
    pub aod_el_deg: f64,
    pub delay_s: f64,
    pub is_los: bool,
}

impl PathEntry {
    pub const ABSENT: PathEntry = PathEntry {
        loss_db: MAX_LOSS_DB,
        aoa_az_deg: 0.0,
        aoa_el_deg: 0.0,
        aod_az_deg: 0.0,
        aod_el_deg: 0.0,
        delay_s: 0.0,
        is_los: false,
    };

    #[inline]
    pub fn is_present(&self) -> bool {
        self.loss_db < MAX_LOSS_DB
    }
}

impl Default for PathEntry {
    fn default() -> Self {
        Self::ABSENT
    }
}

/// Exactly [`K_PATHS`] path slots. Present paths come first; a LOS path, when
/// present, sits at index 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathSet {
    pub entries: [PathEntry; K_PATHS],
}

impl Default for PathSet {
    fn default() -> Self {
        Self::empty()
    }
}

impl PathSet {
    pub const fn empty() -> Self {
        PathSet {
            entries: [PathEntry::ABSENT; K_PATHS],
        }
    }

    /// Builds a set from up to `K_PATHS` present entries, padding with absent
    /// slots. Extra entries are dropped.
    pub fn from_present(paths: &[PathEntry]) -> Self {
        let mut set = Self::empty();
        for (slot, p) in set.entries.iter_mut().zip(paths.iter()) {
            *slot = *p;
        }
        set
    }

    pub fn present(&self) -> impl Iterator<Item = &PathEntry> + '_ {
        self.entries.iter().filter(|e| e.is_present())
    }

    pub fn n_present(&self) -> usize {
        self.present().count()
    }

    pub fn los(&self) -> Option<&PathEntry> {
        self.entries.iter().find(|e| e.is_los && e.is_present())
    }

    /// Stable reorder putting present paths before absent ones.
    pub fn sort_present_first(&mut self) {
        let mut present: Vec<PathEntry> = self.present().copied().collect();
        present.truncate(K_PATHS);
        *self = Self::from_present(&present);
    }

    /// Copy of this set with the LOS entry removed and the rest compacted.
    pub fn without_los(&self) -> PathSet {
        let nlos: Vec<PathEntry> = self.present().filter(|e| !e.is_los).copied().collect();
        Self::from_present(&nlos)
    }

    /// Smallest loss over present paths.
    pub fn min_loss_db(&self) -> Option<f64> {
        self.present().map(|e| e.loss_db).reduce(f64::min)
    }
}

/// Base-station class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GnbType {
    /// Street level, downtilted.
    Standard,
    /// Rooftop, uptilted.
    Dedicated,
}

impl GnbType {
    pub const ALL: [GnbType; 2] = [GnbType::Standard, GnbType::Dedicated];

    /// Single-dimension one-hot code (C − 1 = 1 for two types).
    pub fn one_hot(self) -> f64 {
        match self {
            GnbType::Standard => 0.0,
            GnbType::Dedicated => 1.0,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            GnbType::Standard => "standard",
            GnbType::Dedicated => "dedicated",
        }
    }

    pub fn parse(s: &str) -> Option<GnbType> {
        match s {
            "standard" => Some(GnbType::Standard),
            "dedicated" => Some(GnbType::Dedicated),
            _ => None,
        }
    }
}

impl fmt::Display for GnbType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Displacement from gNB to UAV plus gNB type.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkCondition {
    pub dx_m: f64,
    pub dy_m: f64,
    pub dz_m: f64,
    pub gnb_type: GnbType,
}

impl LinkCondition {
    pub fn new(dx_m: f64, dy_m: f64, dz_m: f64, gnb_type: GnbType) -> Self {
        LinkCondition {
            dx_m,
            dy_m,
            dz_m,
            gnb_type,
        }
    }

    pub fn displacement(&self) -> [f64; 3] {
        [self.dx_m, self.dy_m, self.dz_m]
    }

    pub fn d3d(&self) -> f64 {
        fmath::sqrt(self.dx_m * self.dx_m + self.dy_m * self.dy_m + self.dz_m * self.dz_m)
    }

    pub fn d2d(&self) -> f64 {
        fmath::sqrt(self.dx_m * self.dx_m + self.dy_m * self.dy_m)
    }

    /// 3D distance, rejecting a zero (or non-finite) displacement.
    pub fn checked_d3d(&self) -> Result<f64> {
        let d = self.d3d();
        if d > 0.0 && d.is_finite() {
            Ok(d)
        } else {
            Err(Error::ZeroDisplacement)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum LinkState {
    Los,
    Nlos,
    NoLink,
}

impl LinkState {
    pub const ALL: [LinkState; 3] = [LinkState::Los, LinkState::Nlos, LinkState::NoLink];

    /// Position in the classifier's probability vector.
    pub fn index(self) -> usize {
        match self {
            LinkState::Los => 0,
            LinkState::Nlos => 1,
            LinkState::NoLink => 2,
        }
    }

    pub fn from_index(i: usize) -> Option<LinkState> {
        Self::ALL.get(i).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            LinkState::Los => "LOS",
            LinkState::Nlos => "NLOS",
            LinkState::NoLink => "NoLink",
        }
    }
}

impl fmt::Display for LinkState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// LOS if a LOS entry is present, NoLink if every slot is absent, NLOS otherwise.
pub fn derive_link_state(paths: &PathSet) -> LinkState {
    if paths.los().is_some() {
        LinkState::Los
    } else if paths.n_present() == 0 {
        LinkState::NoLink
    } else {
        LinkState::Nlos
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkRecord {
    pub env_id: String,
    pub condition: LinkCondition,
    pub paths: PathSet,
}

impl LinkRecord {
    pub fn state(&self) -> LinkState {
        derive_link_state(&self.paths)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub records: Vec<LinkRecord>,
    pub carrier_hz: f64,
}

impl Dataset {
    pub fn new(records: Vec<LinkRecord>, carrier_hz: f64) -> Result<Self> {
        if records.is_empty() {
            return Err(Error::Empty("dataset has no records"));
        }
        if !(carrier_hz > 0.0) {
            return Err(Error::InvalidArgument(alloc::format!(
                "carrier frequency must be positive, got {carrier_hz}"
            )));
        }
        Ok(Dataset {
            records,
            carrier_hz,
        })
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Records of a single gNB type, or all of them.
    pub fn filter_gnb(&self, gnb: Option<GnbType>) -> impl Iterator<Item = &LinkRecord> + '_ {
        self.records
            .iter()
            .filter(move |r| gnb.map_or(true, |g| r.condition.gnb_type == g))
    }
}

/// One broken invariant found by [`validate_record`].
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    LossOutOfRange { index: usize, loss_db: f64 },
    AzimuthOutOfRange { index: usize, value: f64 },
    ElevationOutOfRange { index: usize, value: f64 },
    NegativeDelay { index: usize },
    NonFinite { index: usize },
    AbsentNotZeroed { index: usize },
    PresentAfterAbsent { index: usize },
    LosNotAtIndexZero { index: usize },
    MultipleLos,
    AbsentMarkedLos { index: usize },
    ZeroDisplacement,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::LossOutOfRange { index, loss_db } => {
                write!(f, "path {index}: loss {loss_db} dB outside (0, 200]")
            }
            Violation::AzimuthOutOfRange { index, value } => {
                write!(f, "path {index}: azimuth {value} outside (-180, 180]")
            }
            Violation::ElevationOutOfRange { index, value } => {
                write!(f, "path {index}: elevation {value} outside [0, 180]")
            }
            Violation::NegativeDelay { index } => write!(f, "path {index}: negative delay"),
            Violation::NonFinite { index } => write!(f, "path {index}: non-finite value"),
            Violation::AbsentNotZeroed { index } => {
                write!(f, "path {index}: absent path with nonzero fields")
            }
            Violation::PresentAfterAbsent { index } => {
                write!(f, "path {index}: present path after an absent one")
            }
            Violation::LosNotAtIndexZero { index } => {
                write!(f, "path {index}: LOS not at index 0")
            }
            Violation::MultipleLos => f.write_str("more than one LOS path"),
            Violation::AbsentMarkedLos { index } => {
                write!(f, "path {index}: absent path flagged LOS")
            }
            Violation::ZeroDisplacement => f.write_str("zero displacement"),
        }
    }
}

/// Findings of [`validate_record`]; empty means valid.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

fn azimuth_ok(a: f64) -> bool {
    a > -180.0 && a <= 180.0
}

fn elevation_ok(a: f64) -> bool {
    (0.0..=180.0).contains(&a)
}

/// Checks every record invariant and lists all violations.
pub fn validate_record(rec: &LinkRecord) -> ValidationReport {
    let mut v = Vec::new();
    if rec.condition.checked_d3d().is_err() {
        v.push(Violation::ZeroDisplacement);
    }
    let mut seen_absent = false;
    let mut n_los = 0;
    for (index, e) in rec.paths.entries.iter().enumerate() {
        let fields = [
            e.loss_db,
            e.aoa_az_deg,
            e.aoa_el_deg,
            e.aod_az_deg,
            e.aod_el_deg,
            e.delay_s,
        ];
        if fields.iter().any(|x| !x.is_finite()) {
            v.push(Violation::NonFinite { index });
            continue;
        }
        if !(e.loss_db > 0.0 && e.loss_db <= MAX_LOSS_DB) {
            v.push(Violation::LossOutOfRange {
                index,
                loss_db: e.loss_db,
            });
            continue;
        }
        if !e.is_present() {
            seen_absent = true;
            if e.is_los {
                v.push(Violation::AbsentMarkedLos { index });
            }
            if fields[1..].iter().any(|&x| x != 0.0) {
                v.push(Violation::AbsentNotZeroed { index });
            }
            continue;
        }
        if seen_absent {
            v.push(Violation::PresentAfterAbsent { index });
        }
        for a in [e.aoa_az_deg, e.aod_az_deg] {
            if !azimuth_ok(a) {
                v.push(Violation::AzimuthOutOfRange { index, value: a });
            }
        }
        for a in [e.aoa_el_deg, e.aod_el_deg] {
            if !elevation_ok(a) {
                v.push(Violation::ElevationOutOfRange { index, value: a });
            }
        }
        if e.delay_s < 0.0 {
            v.push(Violation::NegativeDelay { index });
        }
        if e.is_los {
            n_los += 1;
            if index != 0 {
                v.push(Violation::LosNotAtIndexZero { index });
            }
        }
    }
    if n_los > 1 {
        v.push(Violation::MultipleLos);
    }
    ValidationReport { violations: v }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;
    use proptest::prelude::*;

    fn nlos_path(loss: f64) -> PathEntry {
        PathEntry {
            loss_db: loss,
            aoa_az_deg: 10.0,
            aoa_el_deg: 80.0,
            aod_az_deg: -170.0,
            aod_el_deg: 100.0,
            delay_s: 1e-6,
            is_los: false,
        }
    }

    fn record(paths: PathSet) -> LinkRecord {
        LinkRecord {
            env_id: "t".to_string(),
            condition: LinkCondition::new(30.0, 40.0, 50.0, GnbType::Standard),
            paths,
        }
    }

    #[test]
    fn state_derivation() {
        assert_eq!(derive_link_state(&PathSet::empty()), LinkState::NoLink);

        let mut los = nlos_path(90.0);
        los.is_los = true;
        assert_eq!(derive_link_state(&PathSet::from_present(&[los])), LinkState::Los);

        let nlos = PathSet::from_present(&[nlos_path(120.0)]);
        assert_eq!(derive_link_state(&nlos), LinkState::Nlos);
    }

    #[test]
    fn valid_los_record_has_empty_report() {
        let mut los = nlos_path(90.0);
        los.is_los = true;
        let rec = record(PathSet::from_present(&[los, nlos_path(110.0)]));
        assert!(validate_record(&rec).is_valid());
    }

    #[test]
    fn negative_delay_reported() {
        let mut p = nlos_path(120.0);
        p.delay_s = -1.0;
        let report = validate_record(&record(PathSet::from_present(&[p])));
        assert_eq!(report.violations, [Violation::NegativeDelay { index: 0 }]);
        assert_eq!(report.violations[0].to_string(), "path 0: negative delay");
    }

    #[test]
    fn los_off_index_zero_reported() {
        let mut paths = [nlos_path(120.0); 4];
        paths[3].is_los = true;
        let report = validate_record(&record(PathSet::from_present(&paths)));
        assert_eq!(report.violations, [Violation::LosNotAtIndexZero { index: 3 }]);
        assert!(report.violations[0].to_string().contains("LOS not at index 0"));
    }

    #[test]
    fn ordering_and_ranges_reported() {
        let mut set = PathSet::empty();
        set.entries[2] = nlos_path(120.0);
        set.entries[2].aoa_el_deg = 181.0;
        set.entries[3].aod_az_deg = 5.0;
        let report = validate_record(&record(set));
        assert!(report
            .violations
            .contains(&Violation::PresentAfterAbsent { index: 2 }));
        assert!(report
            .violations
            .contains(&Violation::ElevationOutOfRange { index: 2, value: 181.0 }));
        assert!(report
            .violations
            .contains(&Violation::AbsentNotZeroed { index: 3 }));
    }

    #[test]
    fn d3d_full_precision() {
        let u = LinkCondition::new(30.0, 40.0, 50.0, GnbType::Dedicated);
        assert_eq!(u.d3d(), 5000f64.sqrt());
        let zero = LinkCondition::new(0.0, 0.0, 0.0, GnbType::Standard);
        assert_eq!(zero.checked_d3d(), Err(Error::ZeroDisplacement));
    }

    proptest! {
        #[test]
        fn sort_present_first_idempotent(mask in proptest::collection::vec(any::<bool>(), K_PATHS),
                                         losses in proptest::collection::vec(50.0f64..199.0, K_PATHS)) {
            let mut set = PathSet::empty();
            for k in 0..K_PATHS {
                if mask[k] {
                    set.entries[k] = nlos_path(losses[k]);
                }
            }
            let mut once = set;
            once.sort_present_first();
            let mut twice = once;
            twice.sort_present_first();
            prop_assert_eq!(once, twice);
            prop_assert_eq!(once.n_present(), set.n_present());
            prop_assert_eq!(derive_link_state(&once), derive_link_state(&set));
        }

        #[test]
        fn d3d_positive(dx in -1e3f64..1e3, dy in -1e3f64..1e3, dz in 0.5f64..1e3) {
            let u = LinkCondition::new(dx, dy, dz, GnbType::Standard);
            let d = u.d3d();
            prop_assert!(d > 0.0);
            prop_assert_eq!(d, (dx * dx + dy * dy + dz * dz).sqrt());
        }
    }
}
