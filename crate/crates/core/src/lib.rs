//! Zone-aware keyword spotting for handwritten text lines.
//!
//! Lines are described by sliding-window PHOG features over ink and over
//! bottom water reservoirs, scored with GMM-HMM keyword and filler
//! networks, optionally restricted to the middle zone found by an HMM zone
//! segmenter, and re-ranked by counting upper and lower modifiers.

pub mod config;
pub mod error;
pub mod eval;
pub mod features;
pub mod lexmap;
pub mod manifest;
pub mod pipeline;
pub mod raster;
pub mod scalar;
pub mod seqmodel;
pub mod spotting;
pub mod synth;
pub mod zones;

pub use error::{Error, Result};
pub use scalar::Scalar;

/// Mixture state over `f64`, the precision used throughout training.
pub type GmmState64 = seqmodel::GmmState<f64>;
/// Mixture state over `f32`.
pub type GmmState32 = seqmodel::GmmState<f32>;
pub type CharHmm64 = seqmodel::CharHmm<f64>;
pub type CharHmm32 = seqmodel::CharHmm<f32>;
pub type ModelSet64 = seqmodel::ModelSet<f64>;
pub type ModelSet32 = seqmodel::ModelSet<f32>;
pub type FeatureSequence64 = features::FeatureSequence<f64>;
pub type FeatureSequence32 = features::FeatureSequence<f32>;
