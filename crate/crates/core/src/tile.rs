//! Three-plane 8-bit rasters: road-major, road-minor and topography.

use std::path::Path;

use deepstreet_tensor::Tensor;
use image::RgbImage;

use crate::error::{Error, Result};

pub const ROAD_MAJOR: usize = 0;
pub const ROAD_MINOR: usize = 1;
pub const TOPO: usize = 2;
pub const CHANNELS: usize = 3;

/// Value of an empty (void) pixel in every road channel.
pub const VOID: u8 = 255;

/// Planar `[3][height][width]` raster in channel order (road_major, road_minor, topo).
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct RasterImage {
    height: usize,
    width: usize,
    data: Vec<u8>,
}

/// A square training/testing unit.
pub type Tile = RasterImage;

impl RasterImage {
    /// All-void roads over topo value `topo`.
    pub fn blank(height: usize, width: usize, topo: u8) -> Self {
        let plane = height * width;
        let mut data = vec![VOID; CHANNELS * plane];
        data[TOPO * plane..].fill(topo);
        Self { height, width, data }
    }

    pub fn from_planes(height: usize, width: usize, data: Vec<u8>) -> Result<Self> {
        if height == 0 || width == 0 || data.len() != CHANNELS * height * width {
            return Err(Error::Geometry(format!(
                "{} bytes for a {height}x{width} three-channel raster",
                data.len()
            )));
        }
        Ok(Self { height, width, data })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    /// Side length if square.
    pub fn side(&self) -> Option<usize> {
        (self.height == self.width).then_some(self.height)
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn channel(&self, c: usize) -> &[u8] {
        let plane = self.height * self.width;
        &self.data[c * plane..(c + 1) * plane]
    }

    pub fn channel_mut(&mut self, c: usize) -> &mut [u8] {
        let plane = self.height * self.width;
        &mut self.data[c * plane..(c + 1) * plane]
    }

    pub fn get(&self, c: usize, row: usize, col: usize) -> u8 {
        self.data[(c * self.height + row) * self.width + col]
    }

    pub fn set(&mut self, c: usize, row: usize, col: usize, v: u8) {
        self.data[(c * self.height + row) * self.width + col] = v;
    }

    /// `(road_major, road_minor)` at a pixel.
    pub fn road_code(&self, row: usize, col: usize) -> (u8, u8) {
        (self.get(ROAD_MAJOR, row, col), self.get(ROAD_MINOR, row, col))
    }

    pub fn is_road(&self, row: usize, col: usize) -> bool {
        self.road_code(row, col) != (VOID, VOID)
    }

    /// Road channels contain only 0 and 255.
    pub fn roads_are_binary(&self) -> bool {
        let plane = self.height * self.width;
        self.data[..2 * plane].iter().all(|&v| v == 0 || v == 255)
    }

    pub fn crop(&self, row0: usize, col0: usize, height: usize, width: usize) -> Result<Self> {
        if row0 + height > self.height || col0 + width > self.width || height == 0 || width == 0 {
            return Err(Error::Geometry(format!(
                "window {height}x{width} at ({row0},{col0}) outside {}x{}",
                self.height, self.width
            )));
        }
        let mut data = Vec::with_capacity(CHANNELS * height * width);
        for c in 0..CHANNELS {
            let plane = self.channel(c);
            for r in row0..row0 + height {
                data.extend_from_slice(&plane[r * self.width + col0..r * self.width + col0 + width]);
            }
        }
        Ok(Self { height, width, data })
    }

    /// Rotates by 90 degrees clockwise.
    pub fn rotate90(&self) -> Self {
        let (h, w) = (self.height, self.width);
        let mut out = Self { height: w, width: h, data: vec![0; self.data.len()] };
        for c in 0..CHANNELS {
            for r in 0..h {
                for q in 0..w {
                    out.set(c, q, h - 1 - r, self.get(c, r, q));
                }
            }
        }
        out
    }

    /// `[3, H, W]` tensor with bytes mapped to `[0, 1]` by division by 255.
    pub fn to_tensor(&self) -> Tensor {
        let data = self.data.iter().map(|&v| normalize(v)).collect();
        Tensor::new([CHANNELS, self.height, self.width], data).expect("planar layout")
    }

    /// Inverse of [`RasterImage::to_tensor`]; accepts `[3, H, W]` or `[1, 3, H, W]`.
    pub fn from_tensor(t: &Tensor) -> Result<Self> {
        let (h, w) = match *t.shape() {
            [CHANNELS, h, w] | [1, CHANNELS, h, w] => (h, w),
            ref s => return Err(Error::Geometry(format!("cannot quantize tensor of shape {s:?}"))),
        };
        Self::from_planes(h, w, t.data().iter().map(|&v| quantize(v)).collect())
    }

    pub fn to_rgb(&self) -> RgbImage {
        RgbImage::from_fn(self.width as u32, self.height as u32, |x, y| {
            let (r, c) = (y as usize, x as usize);
            image::Rgb([self.get(0, r, c), self.get(1, r, c), self.get(2, r, c)])
        })
    }

    pub fn from_rgb(img: &RgbImage) -> Result<Self> {
        let (w, h) = (img.width() as usize, img.height() as usize);
        let mut out = Self::blank(h, w, 0);
        for (x, y, px) in img.enumerate_pixels() {
            for c in 0..CHANNELS {
                out.set(c, y as usize, x as usize, px.0[c]);
            }
        }
        Ok(out)
    }

    /// 8-bit RGB PNG with channel order (road_major, road_minor, topo).
    pub fn save_png(&self, path: &Path) -> Result<()> {
        self.to_rgb().save_with_format(path, image::ImageFormat::Png)?;
        Ok(())
    }

    pub fn load_png(path: &Path) -> Result<Self> {
        let img = image::open(path)?;
        Self::from_rgb(&img.to_rgb8())
    }

    pub fn encode_png(&self) -> Result<Vec<u8>> {
        let mut out = std::io::Cursor::new(Vec::new());
        self.to_rgb().write_to(&mut out, image::ImageFormat::Png)?;
        Ok(out.into_inner())
    }

    pub fn decode_png(bytes: &[u8]) -> Result<Self> {
        let img = image::load_from_memory_with_format(bytes, image::ImageFormat::Png)?;
        Self::from_rgb(&img.to_rgb8())
    }
}

pub fn normalize(v: u8) -> f32 {
    v as f32 / 255.0
}

/// Nearest byte of a `[0, 1]` value; out-of-range values saturate.
pub fn quantize(v: f32) -> u8 {
    (v * 255.0).round().clamp(0.0, 255.0) as u8
}

/// Snaps every road-channel value to the nearer of 0 and 255; topo is untouched.
pub fn threshold_roads(tile: &RasterImage) -> RasterImage {
    let mut out = tile.clone();
    for c in [ROAD_MAJOR, ROAD_MINOR] {
        out.channel_mut(c).iter_mut().for_each(|v| *v = if *v >= 128 { 255 } else { 0 });
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantize_inverts_normalize() {
        for v in 0..=255u8 {
            assert_eq!(quantize(normalize(v)), v);
        }
    }

    #[test]
    fn png_round_trip_is_lossless() {
        let mut t = RasterImage::blank(5, 7, 100);
        t.set(ROAD_MAJOR, 1, 2, 0);
        t.set(TOPO, 4, 6, 17);
        let back = RasterImage::decode_png(&t.encode_png().unwrap()).unwrap();
        assert_eq!(back, t);
    }

    #[test]
    fn rotating_four_times_is_identity() {
        let mut t = RasterImage::blank(3, 4, 9);
        t.set(ROAD_MINOR, 0, 3, 0);
        let r = t.rotate90();
        assert_eq!((r.height(), r.width()), (4, 3));
        assert_eq!(r.get(ROAD_MINOR, 3, 2), 0);
        assert_eq!(r.rotate90().rotate90().rotate90(), t);
    }

    #[test]
    fn threshold_snaps_roads_only() {
        let mut t = RasterImage::blank(1, 2, 77);
        t.set(ROAD_MAJOR, 0, 0, 127);
        t.set(ROAD_MINOR, 0, 1, 128);
        let s = threshold_roads(&t);
        assert_eq!(s.road_code(0, 0), (0, 255));
        assert_eq!(s.road_code(0, 1), (255, 255));
        assert_eq!(s.channel(TOPO), t.channel(TOPO));
    }
}
