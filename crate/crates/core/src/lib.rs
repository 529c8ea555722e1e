//! Carbonate prediction from near-infrared soil spectra: preprocessing,
//! agreement metrics, linear and neural regressors, and model storage.

pub mod cli;
pub mod error;
pub mod metrics;
pub mod models;
pub mod neural;
pub mod preprocess;
pub mod spectral;
pub mod store;
pub mod synth;

pub use error::{Error, ErrorClass, Result};
