//! Pixel-level material classification of pushbroom hyperspectral cubes.
//!
//! The crate covers the whole pipeline: cube and mask formats
//! ([`data`]), dark-reference normalization ([`calibration`]), a 1D
//! convolutional classifier with analytic gradients ([`model`]), training
//! with Adam under a warmup + cosine learning-rate schedule ([`training`]),
//! line-streamed inference ([`inference`]), median/morphological clean-up of
//! the assembled class map ([`postprocess`]), pixel metrics
//! ([`evaluation`]) and a synthetic conveyor-scene generator ([`synth`]).

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod calibration;
pub mod data;
pub mod evaluation;
mod error;
pub mod inference;
mod kv;
pub mod manifest;
pub mod model;
pub mod postprocess;
pub mod synth;
pub mod training;

pub use error::{Error, Result};
