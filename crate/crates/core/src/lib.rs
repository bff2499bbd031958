//! Street-network tile completion: rasterization, masking, networks, training,
//! inference and evaluation.

// `!(x > 0.0)` is used on purpose so NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod checkpoint;
pub mod completion;
pub mod config;
pub mod error;
pub mod evaluation;
pub mod mask;
pub mod network;
pub mod raster;
pub mod synth;
pub mod tile;
pub mod training;

pub use config::PipelineConfig;
pub use error::{Error, Result};
pub use mask::{apply_mask, random_mask, HoleRect, Mask, MaskGeometry};
pub use tile::{RasterImage, Tile};
