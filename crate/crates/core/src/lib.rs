//! Single-pair cross-modality super-resolution.
//!
//! A low-resolution modality image (thermal, depth, ...) is super-resolved
//! with the help of a high-resolution RGB guide of the same scene. A small
//! network is trained from scratch on the pair itself, while a learnable
//! deformation stack aligns the guide to the modality.

pub mod checkpoint;
pub mod config;
pub mod deform;
pub mod error;
pub mod image_io;
pub mod infer;
pub mod metrics;
pub mod net;
pub mod patch;
pub mod record;
pub mod synthetic;
pub mod tensor;
pub mod train;

pub use error::{Error, Result};
