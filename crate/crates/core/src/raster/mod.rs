//! Road vectors and elevation to a multi-channel city raster, and tile sampling.
//!
//! Road hierarchy is encoded in the two road channels:
//!
//! | class  | road_major | road_minor |
//! |--------|-----------:|-----------:|
//! | class1 | 255        | 0          |
//! | class2 | 0          | 255        |
//! | class3 | 0          | 0          |
//! | void   | 255        | 255        |
//!
//! The topo channel holds elevation, linearly rescaled and inverted so that the
//! lowest elevation is 255 and the highest 0.

mod dem;
mod manifest;
mod roads;
mod tiles;

pub use dem::{encode_dem, DemGrid};
pub use manifest::{Manifest, ManifestHeader, ManifestRecord};
pub use roads::{parse_road_lines, stroke_roads, RoadClass, RoadClassTable, RoadSegment, StrokeStats};
pub use tiles::{sample_tiles, split_dataset, split_indices, OverlapPolicy, Split, TileSample};

use crate::error::{Error, Result};
use crate::tile::{RasterImage, TOPO};

/// Planar placement of a raster: top-left corner in meters, north up, rows running south.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RasterGeometry {
    pub origin_x: f64,
    pub origin_y: f64,
    pub pixel_size_m: f64,
    pub width: usize,
    pub height: usize,
}

impl RasterGeometry {
    /// Planar coordinates of a pixel center.
    pub fn pixel_center(&self, row: usize, col: usize) -> (f64, f64) {
        (
            self.origin_x + (col as f64 + 0.5) * self.pixel_size_m,
            self.origin_y - (row as f64 + 0.5) * self.pixel_size_m,
        )
    }
}

/// The whole-city raster that tiles are cut from.
#[derive(Clone, Debug, PartialEq)]
pub struct CityRaster {
    pub geometry: RasterGeometry,
    pub image: RasterImage,
}

impl CityRaster {
    /// Replaces the topo channel; `topo` must match the raster extent.
    pub fn set_topo(&mut self, topo: &[u8]) -> Result<()> {
        let plane = self.image.channel_mut(TOPO);
        if plane.len() != topo.len() {
            return Err(Error::Geometry(format!(
                "topo plane of {} pixels for a raster of {}",
                topo.len(),
                plane.len()
            )));
        }
        plane.copy_from_slice(topo);
        Ok(())
    }
}
