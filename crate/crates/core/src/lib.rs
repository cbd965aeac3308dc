//! Environmental sound classification with adversarial waveform
//! augmentation.
//!
//! The crate covers the full pipeline: WAV I/O and resampling, classical
//! augmentation (time stretch, pitch shift, dynamic range compression,
//! background mixing), a raw-waveform WGAN-GP generator/critic pair built
//! on a small reverse-mode differentiation engine, similarity filtering of
//! generated clips, log-mel features, a 2-D CNN classifier, and the
//! cross-validation metrics used to compare augmentation schemes.

pub mod audio;
pub mod augment;
pub mod autodiff;
pub mod classifier;
pub mod config;
pub mod dataset;
pub mod error;
pub mod features;
pub mod gan;
pub mod metrics;
pub mod pipeline;
pub mod simfilter;
pub mod synth;

pub use error::{Error, Result};
