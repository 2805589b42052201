//! Fock-space simulation of post-selected linear-optical polarization
//! circuits, with the analysis chain used to characterise a photonic
//! controlled-SWAP gate.
//!
//! The crate is `no_std` and needs only `alloc`. File formats, the command
//! line and parallel scheduling live in the companion `lopsim` crate.

#![no_std]

extern crate alloc;

pub mod circuit;
pub mod experiment;
pub mod fock;
pub mod linalg;
pub mod measure;
pub mod metrics;
pub mod optics;
pub mod source;
pub mod tomography;

use alloc::string::String;

pub use fock::{
    evolve_permanent, evolve_sequential, inner_product, permanent, CreationPoly, Exactness, FockState, ModeIndex,
    ModeList, ModeRegistry, Occupation, Pol, TransferMatrix,
};
pub use linalg::{c64, CMat, C64};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("photon number {found} exceeds N_max = {n_max}")]
    Truncation { found: usize, n_max: usize },
    #[error("states belong to different mode registries")]
    RegistryMismatch,
    #[error("unknown port `{0}`")]
    UnknownPort(String),
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("input `{0}` is not normalized")]
    NotNormalized(String),
    #[error("invalid density matrix: {0}")]
    InvalidDensity(String),
    #[error("missing measurement setting `{0}`")]
    MissingSetting(String),
    #[error("measurement settings differ between runs: {0}")]
    SettingMismatch(String),
    #[error("input row `{0}` has zero total counts")]
    ZeroRow(String),
}
