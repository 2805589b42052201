//! Scenario runner, file formats and command line for `lopsim-core`.

pub mod formats;
pub mod report;
pub mod run;
pub mod scenario;
pub mod tomography;
pub mod validate;

pub use lopsim_core as core;
