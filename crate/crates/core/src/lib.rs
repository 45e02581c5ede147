//! Exact diagonalization of the anisotropic Dicke model in truncated parity
//! sectors, with ergodicity diagnostics: level-spacing statistics, the mean
//! spacing ratio ⟨r⟩, a thermal out-of-time-order correlator and the maximum
//! eigenstate overlap with an integrable reference.

pub mod error;
pub mod model;
pub mod app;
pub mod diagnostics;
pub mod exec;
pub mod otoc;
pub mod overlap;
pub mod spectra;

pub use error::{Error, Result};
