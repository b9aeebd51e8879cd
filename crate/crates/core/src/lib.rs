//! Core algorithms for simulating machine-learning attacks on location data.
//!
//! The crate is `no_std` (with `alloc`): projection and spatial indexing,
//! location masking, feature extraction, the gradient-boosted classifier,
//! cross-validated evaluation, user profiling with re-identification and
//! privacy-loss metrics, semivariograms, and a synthetic city generator.
//! File formats, configuration and the CLI live in the `semloc` crate.

#![no_std]
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod city;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod features;
pub mod geo;
pub mod index;
mod math;
pub mod model;
pub mod obfuscate;
pub mod profiling;
pub mod rng;
pub mod synth;
pub mod taxonomy;
pub mod time;
pub mod variogram;

pub use error::{Error, Result};
pub use math::median;
