//! The mask channel: 0 inside the generation region (the hole), 1 elsewhere.

use std::path::Path;

use image::GrayImage;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tile::{Tile, ROAD_MAJOR, ROAD_MINOR};

/// Axis-aligned hole rectangle in pixel coordinates.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct HoleRect {
    pub row0: usize,
    pub col0: usize,
    pub height: usize,
    pub width: usize,
}

impl HoleRect {
    /// Rectangle spanning `[c - size/2, c - size/2 + size)` on each axis.
    pub fn centered(center_row: usize, center_col: usize, height: usize, width: usize) -> Result<Self> {
        if center_row < height / 2 || center_col < width / 2 {
            return Err(Error::InvalidMask(format!(
                "a {height}x{width} hole cannot be centered at ({center_row},{center_col})"
            )));
        }
        Ok(Self { row0: center_row - height / 2, col0: center_col - width / 2, height, width })
    }

    /// `(row, col)` of the center, matching [`HoleRect::centered`].
    pub fn center(&self) -> (usize, usize) {
        (self.row0 + self.height / 2, self.col0 + self.width / 2)
    }

    pub fn row_end(&self) -> usize {
        self.row0 + self.height
    }

    pub fn col_end(&self) -> usize {
        self.col0 + self.width
    }

    pub fn contains(&self, row: usize, col: usize) -> bool {
        (self.row0..self.row_end()).contains(&row) && (self.col0..self.col_end()).contains(&col)
    }

    pub fn area(&self) -> usize {
        self.height * self.width
    }
}

/// Random-hole family: a `hole_px` square with each center coordinate uniform
/// on `[center_min, center_max]` inside a `tile_px` tile.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MaskGeometry {
    pub tile_px: usize,
    pub hole_px: usize,
    pub center_min: usize,
    pub center_max: usize,
}

impl MaskGeometry {
    pub const PAPER: Self = Self { tile_px: 256, hole_px: 48, center_min: 64, center_max: 192 };
    pub const DESK: Self = Self { tile_px: 64, hole_px: 16, center_min: 16, center_max: 48 };

    pub fn validate(&self) -> Result<()> {
        let h = self.hole_px;
        if h == 0 || self.center_min > self.center_max {
            return Err(Error::Config(format!("bad mask geometry {self:?}")));
        }
        if self.center_min < h / 2 || self.center_max - h / 2 + h > self.tile_px {
            return Err(Error::Config(format!("holes of {self:?} can leave the tile")));
        }
        Ok(())
    }

    pub fn random(&self, rng: &mut impl Rng) -> Mask {
        let r = rng.random_range(self.center_min..=self.center_max);
        let c = rng.random_range(self.center_min..=self.center_max);
        let hole = HoleRect::centered(r, c, self.hole_px, self.hole_px).expect("validated geometry");
        Mask { height: self.tile_px, width: self.tile_px, hole: Some(hole) }
    }
}

/// Reproducible random mask for `seed`.
pub fn random_mask(geometry: &MaskGeometry, seed: u64) -> Result<Mask> {
    geometry.validate()?;
    Ok(geometry.random(&mut ChaCha8Rng::seed_from_u64(seed)))
}

/// Single-rectangle mask; `hole == None` means no generation region.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Mask {
    pub height: usize,
    pub width: usize,
    pub hole: Option<HoleRect>,
}

impl Mask {
    /// All ones: the whole tile is context.
    pub fn full(height: usize, width: usize) -> Self {
        Self { height, width, hole: None }
    }

    pub fn rect(height: usize, width: usize, hole: HoleRect) -> Result<Self> {
        if hole.height == 0 || hole.width == 0 {
            return Err(Error::InvalidMask(format!("degenerate {}x{} hole", hole.height, hole.width)));
        }
        if hole.row_end() > height || hole.col_end() > width {
            return Err(Error::InvalidMask(format!(
                "hole {}x{} at ({},{}) exceeds the {height}x{width} tile",
                hole.height, hole.width, hole.row0, hole.col0
            )));
        }
        Ok(Self { height, width, hole: Some(hole) })
    }

    /// Mask value at a pixel: 0 in the hole, 1 elsewhere.
    pub fn get(&self, row: usize, col: usize) -> u8 {
        u8::from(!self.hole.is_some_and(|h| h.contains(row, col)))
    }

    pub fn in_hole(&self, row: usize, col: usize) -> bool {
        self.get(row, col) == 0
    }

    pub fn zero_count(&self) -> usize {
        self.hole.map_or(0, |h| h.area())
    }

    /// Row-major `{0, 1}` values.
    pub fn values(&self) -> Vec<u8> {
        (0..self.height).flat_map(|r| (0..self.width).map(move |c| self.get(r, c))).collect()
    }

    /// Recovers a mask from row-major `{0, 1}` values; the zeros must form one rectangle.
    pub fn from_values(height: usize, width: usize, values: &[u8]) -> Result<Self> {
        if values.len() != height * width {
            return Err(Error::InvalidMask(format!("{} values for a {height}x{width} mask", values.len())));
        }
        let mut bbox: Option<(usize, usize, usize, usize)> = None;
        for (i, &v) in values.iter().enumerate() {
            match v {
                0 => {
                    let (r, c) = (i / width, i % width);
                    bbox = Some(match bbox {
                        None => (r, c, r, c),
                        Some((r0, c0, r1, c1)) => (r0.min(r), c0.min(c), r1.max(r), c1.max(c)),
                    });
                }
                1 => {}
                other => return Err(Error::InvalidMask(format!("mask value {other} is not 0 or 1"))),
            }
        }
        let Some((r0, c0, r1, c1)) = bbox else {
            return Ok(Self::full(height, width));
        };
        let hole = HoleRect { row0: r0, col0: c0, height: r1 - r0 + 1, width: c1 - c0 + 1 };
        let zeros = values.iter().filter(|&&v| v == 0).count();
        if zeros != hole.area() {
            return Err(Error::InvalidMask("zeros do not form a single rectangle".into()));
        }
        Self::rect(height, width, hole)
    }

    /// `[H*W]` float plane with 1.0 for context and 0.0 for the hole.
    pub fn plane(&self) -> Vec<f32> {
        self.values().into_iter().map(f32::from).collect()
    }

    /// Single-channel PNG, 0 inside the hole and 255 elsewhere.
    pub fn to_gray(&self) -> GrayImage {
        GrayImage::from_fn(self.width as u32, self.height as u32, |x, y| {
            image::Luma([self.get(y as usize, x as usize) * 255])
        })
    }

    pub fn from_gray(img: &GrayImage) -> Result<Self> {
        let mut values = Vec::with_capacity(img.len());
        for p in img.pixels() {
            values.push(match p.0[0] {
                0 => 0,
                255 => 1,
                v => return Err(Error::InvalidMask(format!("mask pixel {v} is not 0 or 255"))),
            });
        }
        Self::from_values(img.height() as usize, img.width() as usize, &values)
    }

    pub fn save_png(&self, path: &Path) -> Result<()> {
        self.to_gray().save_with_format(path, image::ImageFormat::Png)?;
        Ok(())
    }

    pub fn load_png(path: &Path) -> Result<Self> {
        Self::from_gray(&image::open(path)?.to_luma8())
    }

    pub fn check_tile(&self, tile: &Tile) -> Result<()> {
        if (tile.height(), tile.width()) != (self.height, self.width) {
            return Err(Error::Geometry(format!(
                "mask {}x{} vs tile {}x{}",
                self.height,
                self.width,
                tile.height(),
                tile.width()
            )));
        }
        Ok(())
    }
}

/// Replaces road channels inside the hole with `fill`; topo and context are untouched.
pub fn apply_mask(tile: &Tile, mask: &Mask, fill: u8) -> Result<Tile> {
    mask.check_tile(tile)?;
    let mut out = tile.clone();
    if let Some(h) = mask.hole {
        for c in [ROAD_MAJOR, ROAD_MINOR] {
            for r in h.row0..h.row_end() {
                for q in h.col0..h.col_end() {
                    out.set(c, r, q, fill);
                }
            }
        }
    }
    Ok(out)
}
