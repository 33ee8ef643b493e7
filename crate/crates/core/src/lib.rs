//! Straight-segment detection by linking contextual and local edges along
//! quantized scan directions.
//!
//! The pipeline, per direction: windowed Normal fits along every scan line
//! ([`direction`]), central-difference derivatives ([`gradient`]), the edge
//! linking state machine ([`linker`]) and rectangle fitting ([`rect`]).
//! [`pipeline::Detector`] runs all of it.

// `!(x > 0.0)` style checks are how parameter validation rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bench;
pub mod direction;
pub mod error;
pub mod gradient;
pub mod image;
pub mod linker;
pub mod output;
pub mod pipeline;
pub mod rect;
pub mod stats;
pub mod synth;

pub use error::{Error, Result};
pub use image::GrayImage;
pub use pipeline::{detect, DetectionResult, Detector, DetectorConfig};
pub use rect::Rectangle;
