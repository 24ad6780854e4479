//! Quality-aware training for small image classifiers.
//!
//! The crate covers the whole pipeline: CIFAR-10 ingestion and per-epoch
//! distortion mixtures ([`dataset`]), seeded blur/noise/JPEG generators
//! ([`distort`]), full-reference SSIM scoring ([`iqa`]), a hand-written
//! convolutional network with analytic gradients ([`nn`]) and the strategy
//! runner, evaluation grid and confidence traces ([`trainer`]).

pub mod dataset;
pub mod digest;
pub mod distort;
pub mod error;
pub mod image;
pub mod iqa;
pub mod nn;
pub mod rng;
pub mod trainer;

pub use error::{Error, Result};
pub use image::Image;
