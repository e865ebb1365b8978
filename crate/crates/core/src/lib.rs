//! Structure-stratified spectral calibration for multichannel time series.
//!
//! Samples are grouped into strata by the shape of their Welch power spectra,
//! each stratum gets a fixed reference spectrum, and every feature map is
//! rescaled bin by bin toward the reference of its nearest stratum while its
//! phase is left untouched.

pub mod anchors;
pub mod calibrate;
pub mod config;
pub mod container;
pub mod error;
pub mod harness;
pub mod matrix;
pub mod model;
pub mod spectral;
pub mod stratify;
pub mod synth;

pub use error::{Result, SscfError};
pub use matrix::Matrix;
