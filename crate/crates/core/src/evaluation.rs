//! Diagnostics for completed tiles. These are proxies for a qualitative judgement
//! (several completions can be equally plausible), not ground-truth scores.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use image::{Rgb, RgbImage};

use crate::error::{Error, Result};
use crate::mask::{HoleRect, Mask};
use crate::tile::{normalize, threshold_roads, Tile, CHANNELS};

/// Context ring width for the blank-context detector.
pub const RING_PX: usize = 32;
/// Default road fraction at or below which the ring counts as blank.
pub const BLANK_THRESHOLD: f64 = 0.005;
pub const GUTTER_PX: u32 = 8;
pub const OUTLINE: Rgb<u8> = Rgb([255, 0, 255]);
const GUTTER: Rgb<u8> = Rgb([128, 128, 128]);

fn check(a: &Tile, b: &Tile, mask: &Mask) -> Result<()> {
    mask.check_tile(a)?;
    mask.check_tile(b)
}

/// Sum of squared differences over hole pixels and all channels, in [0, 1] units.
pub fn hole_mse(truth: &Tile, completed: &Tile, mask: &Mask) -> Result<f64> {
    check(truth, completed, mask)?;
    let Some(h) = mask.hole else { return Ok(0.0) };
    let mut total = 0.0f64;
    for c in 0..CHANNELS {
        for r in h.row0..h.row_end() {
            for q in h.col0..h.col_end() {
                let d = normalize(truth.get(c, r, q)) as f64 - normalize(completed.get(c, r, q)) as f64;
                total += d * d;
            }
        }
    }
    Ok(total)
}

const N4: [(isize, isize); 4] = [(-1, 0), (1, 0), (0, -1), (0, 1)];
const N8: [(isize, isize); 8] = [(-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1)];

fn neighbors(
    h: usize,
    w: usize,
    r: usize,
    c: usize,
    offsets: &'static [(isize, isize)],
) -> impl Iterator<Item = (usize, usize)> {
    offsets.iter().filter_map(move |&(dr, dc)| {
        let (nr, nc) = (r.checked_add_signed(dr)?, c.checked_add_signed(dc)?);
        (nr < h && nc < w).then_some((nr, nc))
    })
}

/// Context road pixels with a 4-neighbor inside the hole.
pub fn boundary_stubs(tile: &Tile, mask: &Mask) -> Vec<(usize, usize)> {
    let (h, w) = (tile.height(), tile.width());
    let Some(hole) = mask.hole else { return Vec::new() };
    let rows = hole.row0.saturating_sub(1)..(hole.row_end() + 1).min(h);
    let cols = hole.col0.saturating_sub(1)..(hole.col_end() + 1).min(w);
    let mut stubs = Vec::new();
    for r in rows {
        for c in cols.clone() {
            if !hole.contains(r, c)
                && tile.is_road(r, c)
                && neighbors(h, w, r, c, &N4).any(|(nr, nc)| hole.contains(nr, nc))
            {
                stubs.push((r, c));
            }
        }
    }
    stubs
}

/// Fraction of stubs with a road pixel 8-adjacent inside the hole; 1 when there are no stubs.
/// Road channels are thresholded at 128 first.
pub fn boundary_stub_connectivity(completed: &Tile, mask: &Mask) -> Result<f64> {
    mask.check_tile(completed)?;
    let tile = threshold_roads(completed);
    let stubs = boundary_stubs(&tile, mask);
    let Some(hole) = mask.hole else { return Ok(1.0) };
    if stubs.is_empty() {
        return Ok(1.0);
    }
    let (h, w) = (tile.height(), tile.width());
    let continued = stubs
        .iter()
        .filter(|&&(r, c)| neighbors(h, w, r, c, &N8).any(|(nr, nc)| hole.contains(nr, nc) && tile.is_road(nr, nc)))
        .count();
    Ok(continued as f64 / stubs.len() as f64)
}

/// Pixels outside the hole within `ring_px` (Chebyshev) of it, clipped to the tile.
pub fn context_ring(hole: &HoleRect, height: usize, width: usize, ring_px: usize) -> Vec<(usize, usize)> {
    let rows = hole.row0.saturating_sub(ring_px)..(hole.row_end() + ring_px).min(height);
    let cols = hole.col0.saturating_sub(ring_px)..(hole.col_end() + ring_px).min(width);
    rows.flat_map(|r| cols.clone().map(move |c| (r, c))).filter(|&(r, c)| !hole.contains(r, c)).collect()
}

/// Road fraction of the context ring around the hole; 0 without a hole or ring.
pub fn ring_road_fraction(tile: &Tile, mask: &Mask) -> f64 {
    let Some(hole) = mask.hole else { return 0.0 };
    let ring = context_ring(&hole, tile.height(), tile.width(), RING_PX);
    if ring.is_empty() {
        return 0.0;
    }
    let tile = threshold_roads(tile);
    ring.iter().filter(|&&(r, c)| tile.is_road(r, c)).count() as f64 / ring.len() as f64
}

/// True when the ring around the hole holds a road fraction at or below `threshold`:
/// the setting in which completions tend to come back blank.
pub fn blank_context_detector(masked: &Tile, mask: &Mask, threshold: f64) -> Result<bool> {
    mask.check_tile(masked)?;
    Ok(ring_road_fraction(masked, mask) <= threshold)
}

/// Truth, masked input and completion side by side with the hole outlined.
pub fn montage(truth: &Tile, masked: &Tile, completed: &Tile, mask: &Mask) -> Result<RgbImage> {
    check(truth, masked, mask)?;
    check(truth, completed, mask)?;
    let (w, h) = (truth.width() as u32, truth.height() as u32);
    let mut img = RgbImage::from_pixel(3 * w + 2 * GUTTER_PX, h, GUTTER);
    for (i, panel) in [truth, masked, completed].into_iter().enumerate() {
        let x0 = i as u32 * (w + GUTTER_PX);
        let rgb = panel.to_rgb();
        for (x, y, p) in rgb.enumerate_pixels() {
            img.put_pixel(x0 + x, y, *p);
        }
        if let Some(hole) = mask.hole {
            for r in hole.row0..hole.row_end() {
                for c in hole.col0..hole.col_end() {
                    let edge = r == hole.row0 || r + 1 == hole.row_end() || c == hole.col0 || c + 1 == hole.col_end();
                    if edge {
                        img.put_pixel(x0 + c as u32, r as u32, OUTLINE);
                    }
                }
            }
        }
    }
    Ok(img)
}

/// Per-tile diagnostics.
#[derive(Clone, Debug, PartialEq)]
pub struct EvalRecord {
    pub id: String,
    pub hole_mse: f64,
    pub connectivity: f64,
    pub blank_context: bool,
    pub montage: Option<PathBuf>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct EvalReport {
    pub records: Vec<EvalRecord>,
}

impl EvalReport {
    pub fn mean_hole_mse(&self) -> f64 {
        self.records.iter().map(|r| r.hole_mse).sum::<f64>() / self.records.len().max(1) as f64
    }

    pub fn mean_connectivity(&self) -> f64 {
        self.records.iter().map(|r| r.connectivity).sum::<f64>() / self.records.len().max(1) as f64
    }

    /// Tab-separated table; metric columns are labelled as proxies.
    pub fn to_tsv(&self) -> String {
        let mut s = String::from("id\thole_mse\tconnectivity_proxy\tblank_context\tmontage\n");
        for r in &self.records {
            let m = r.montage.as_ref().map(|p| p.display().to_string()).unwrap_or_default();
            writeln!(s, "{}\t{:.6}\t{:.4}\t{}\t{m}", r.id, r.hole_mse, r.connectivity, r.blank_context).unwrap();
        }
        s
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_tsv()).map_err(|e| Error::io(path, e))
    }
}

/// Diagnostics for one completed tile; writes a montage when `montage_dir` is given.
pub fn evaluate_tile(
    id: &str,
    truth: &Tile,
    masked: &Tile,
    completed: &Tile,
    mask: &Mask,
    montage_dir: Option<&Path>,
) -> Result<EvalRecord> {
    let montage_path = match montage_dir {
        Some(dir) => {
            let p = dir.join(format!("{id}_montage.png"));
            montage(truth, masked, completed, mask)?.save_with_format(&p, image::ImageFormat::Png)?;
            Some(p)
        }
        None => None,
    };
    Ok(EvalRecord {
        id: id.to_string(),
        hole_mse: hole_mse(truth, completed, mask)?,
        connectivity: boundary_stub_connectivity(completed, mask)?,
        blank_context: blank_context_detector(masked, mask, BLANK_THRESHOLD)?,
        montage: montage_path,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tile::{RasterImage, ROAD_MAJOR, ROAD_MINOR};

    fn road(t: &mut Tile, r: usize, c: usize) {
        t.set(ROAD_MAJOR, r, c, 0);
        t.set(ROAD_MINOR, r, c, 0);
    }

    fn hole_mask(side: usize, hole: HoleRect) -> Mask {
        Mask::rect(side, side, hole).unwrap()
    }

    #[test]
    fn hole_mse_examples() {
        let mask = hole_mask(8, HoleRect { row0: 2, col0: 2, height: 3, width: 3 });
        let t = RasterImage::blank(8, 8, 40);
        assert_eq!(hole_mse(&t, &t, &mask).unwrap(), 0.0);
        let mut u = t.clone();
        u.set(ROAD_MAJOR, 3, 3, 0);
        assert_eq!(hole_mse(&u, &t, &mask).unwrap(), 1.0);
        let mut v = t.clone();
        v.set(ROAD_MAJOR, 0, 0, 0);
        assert_eq!(hole_mse(&v, &t, &mask).unwrap(), 0.0);
    }

    #[test]
    fn three_stubs_two_continued() {
        let mask = hole_mask(12, HoleRect { row0: 4, col0: 4, height: 4, width: 4 });
        let mut t = RasterImage::blank(12, 12, 0);
        for (r, c) in [(3, 5), (8, 6), (5, 3)] {
            road(&mut t, r, c);
        }
        road(&mut t, 4, 5);
        road(&mut t, 7, 7);
        assert_eq!(boundary_stubs(&t, &mask).len(), 3);
        assert!((boundary_stub_connectivity(&t, &mask).unwrap() - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn connectivity_edge_cases() {
        let mask = hole_mask(12, HoleRect { row0: 4, col0: 4, height: 4, width: 4 });
        let blank = RasterImage::blank(12, 12, 0);
        assert_eq!(boundary_stub_connectivity(&blank, &mask).unwrap(), 1.0);
        let mut stubs_only = blank.clone();
        road(&mut stubs_only, 3, 5);
        road(&mut stubs_only, 8, 6);
        assert_eq!(boundary_stub_connectivity(&stubs_only, &mask).unwrap(), 0.0);
        // Diagonal corner pixels are not stubs.
        let mut corner = blank.clone();
        road(&mut corner, 3, 3);
        assert!(boundary_stubs(&corner, &mask).is_empty());
    }

    #[test]
    fn blank_detector_examples() {
        let mask = hole_mask(64, HoleRect { row0: 24, col0: 24, height: 16, width: 16 });
        let mut t = RasterImage::blank(64, 64, 0);
        assert!(blank_context_detector(&t, &mask, BLANK_THRESHOLD).unwrap());
        assert!(blank_context_detector(&t, &mask, 0.0).unwrap());
        road(&mut t, 0, 0);
        assert!(!blank_context_detector(&t, &mask, 0.0).unwrap());
        for r in (0..64).step_by(8) {
            for c in 0..64 {
                road(&mut t, r, c);
            }
        }
        assert!(!blank_context_detector(&t, &mask, BLANK_THRESHOLD).unwrap());
    }

    #[test]
    fn montage_layout() {
        let mask = hole_mask(16, HoleRect { row0: 4, col0: 5, height: 6, width: 7 });
        let t = RasterImage::blank(16, 16, 9);
        let img = montage(&t, &t, &t, &mask).unwrap();
        assert_eq!((img.width(), img.height()), (3 * 16 + 2 * GUTTER_PX, 16));
        let x0 = 2 * (16 + GUTTER_PX);
        assert_eq!(*img.get_pixel(x0 + 5, 4), OUTLINE);
        assert_eq!(*img.get_pixel(x0 + 11, 9), OUTLINE);
        assert_ne!(*img.get_pixel(x0 + 6, 5), OUTLINE);
        assert_ne!(*img.get_pixel(x0 + 4, 4), OUTLINE);
        assert_eq!(img, montage(&t, &t, &t, &mask).unwrap());
    }
}
