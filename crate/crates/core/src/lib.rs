//! Two-stage generative channel model for millimeter-wave UAV-to-ground links.
//!
//! A link-state classifier picks LOS / NLOS / NoLink for a link condition, and a
//! conditional variational autoencoder generates the NLOS multipath parameters
//! in a normalized representation that is decoded back to losses, angles and
//! delays. The LOS path, when present, is added deterministically from geometry
//! and Friis' law.
//!
//! The crate also carries refittable 3GPP UMi-AV baselines ([`gpp`]), evaluation
//! statistics ([`metrics`]), a link-budget SNR simulator ([`airsim`]) and a
//! synthetic city generator with analytically known statistics ([`citygen`]).
//!
//! Everything here is `no_std` + `alloc`. File formats and the command-line
//! front end live in the companion `uavchan` crate. Enable the `std` feature to
//! let the matrix kernels pick SIMD paths at runtime.

#![no_std]
#![forbid(unsafe_op_in_unsafe_fn)]

extern crate alloc;
#[cfg(any(test, feature = "std"))]
extern crate std;

pub mod airsim;
pub mod citygen;
pub mod domain;
mod error;
pub(crate) mod fmath;
pub mod genmodel;
pub mod gpp;
pub mod linkstate;
pub mod metrics;
pub mod numerics;
pub mod pathcodec;
pub mod pathvae;

pub use domain::{
    derive_link_state, validate_record, Dataset, GnbType, LinkCondition, LinkRecord, LinkState,
    PathEntry, PathSet, ValidationReport, Violation, K_PATHS, MAX_LOSS_DB,
};
pub use error::{Error, Result};
pub use genmodel::{GenerativeModel, LatentDraw};

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Default carrier frequency, Hz.
pub const DEFAULT_CARRIER_HZ: f64 = 28e9;
