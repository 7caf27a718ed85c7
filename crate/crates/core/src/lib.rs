//! Numerical laboratory for the operator `−Δ − 2iA·∇ + q` arising in acoustic
//! tomography of a moving, absorbing fluid.

pub mod cgo;
pub mod domain;
pub mod error;
pub mod fluid;
pub mod forward;
pub mod reconstruct;
pub mod boundary;
pub mod multifreq;
pub mod verify;

pub use error::{Error, Result};

/// Library version recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
