use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::CityRaster;
use crate::error::{Error, Result};
use crate::tile::Tile;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OverlapPolicy {
    /// Pairwise non-overlapping tiles.
    Disjoint,
    /// Independent uniform origins; tiles may overlap.
    Free,
}

impl FromStr for OverlapPolicy {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "disjoint" => Ok(Self::Disjoint),
            "free" => Ok(Self::Free),
            other => Err(format!("unknown overlap policy `{other}` (disjoint|free)")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Test => "test",
        })
    }
}

impl FromStr for Split {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "train" => Ok(Self::Train),
            "test" => Ok(Self::Test),
            other => Err(format!("unknown split `{other}`")),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TileSample {
    pub id: usize,
    pub row: usize,
    pub col: usize,
    pub split: Split,
    pub tile: Tile,
}

impl TileSample {
    pub fn overlaps(&self, other: &TileSample) -> bool {
        let (a, b) = (self.tile.side().unwrap_or(0), other.tile.side().unwrap_or(0));
        self.row < other.row + b && other.row < self.row + a && self.col < other.col + b && other.col < self.col + a
    }
}

/// Cuts `count` square tiles of side `tile_px` out of `raster`.
///
/// Disjoint sampling lays a grid of `floor(H/tile) x floor(W/tile)` slots at a
/// random global offset and picks distinct slots; the grid index doubles as the
/// placement record that rules out overlaps. Every tile starts tagged `train`.
pub fn sample_tiles(
    raster: &CityRaster,
    count: usize,
    tile_px: usize,
    seed: u64,
    policy: OverlapPolicy,
) -> Result<Vec<TileSample>> {
    let (h, w) = (raster.image.height(), raster.image.width());
    if tile_px == 0 || h < tile_px || w < tile_px {
        return Err(Error::Geometry(format!("raster {h}x{w} is smaller than a {tile_px}-pixel tile")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let origins: Vec<(usize, usize)> = match policy {
        OverlapPolicy::Disjoint => {
            let (gh, gw) = (h / tile_px, w / tile_px);
            if count > gh * gw {
                return Err(Error::CapacityExhausted { requested: count, max: gh * gw });
            }
            let off_r = rng.random_range(0..=h - gh * tile_px);
            let off_c = rng.random_range(0..=w - gw * tile_px);
            let mut slots: Vec<usize> = (0..gh * gw).collect();
            let (picked, _) = slots.partial_shuffle(&mut rng, count);
            picked.iter().map(|&s| (off_r + (s / gw) * tile_px, off_c + (s % gw) * tile_px)).collect()
        }
        OverlapPolicy::Free => (0..count)
            .map(|_| (rng.random_range(0..=h - tile_px), rng.random_range(0..=w - tile_px)))
            .collect(),
    };
    origins
        .into_iter()
        .enumerate()
        .map(|(id, (row, col))| {
            Ok(TileSample { id, row, col, split: Split::Train, tile: raster.image.crop(row, col, tile_px, tile_px)? })
        })
        .collect()
}

/// Split tags for `n` items: a seeded permutation whose first
/// `round(fraction * n)` entries are train.
pub fn split_indices(n: usize, train_fraction: f64, seed: u64) -> Result<Vec<Split>> {
    if n < 2 {
        return Err(Error::Config(format!("need at least 2 tiles to split, got {n}")));
    }
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::Config(format!("train fraction {train_fraction} not in (0,1)")));
    }
    let n_train = (train_fraction * n as f64).round() as usize;
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut tags = vec![Split::Test; n];
    for &i in &order[..n_train] {
        tags[i] = Split::Train;
    }
    Ok(tags)
}

pub fn split_dataset(tiles: &mut [TileSample], train_fraction: f64, seed: u64) -> Result<()> {
    let tags = split_indices(tiles.len(), train_fraction, seed)?;
    for (t, s) in tiles.iter_mut().zip(tags) {
        t.split = s;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::raster::RasterGeometry;
    use crate::tile::RasterImage;

    fn raster(side: usize) -> CityRaster {
        let geometry = RasterGeometry { origin_x: 0.0, origin_y: 0.0, pixel_size_m: 5.0, width: side, height: side };
        CityRaster { geometry, image: RasterImage::blank(side, side, 0) }
    }

    #[test]
    fn full_frame_tile() {
        let tiles = sample_tiles(&raster(256), 1, 256, 3, OverlapPolicy::Disjoint).unwrap();
        assert_eq!((tiles[0].row, tiles[0].col), (0, 0));
    }

    #[test]
    fn four_disjoint_tiles_fill_a_512_raster() {
        let tiles = sample_tiles(&raster(512), 4, 256, 11, OverlapPolicy::Disjoint).unwrap();
        for (i, a) in tiles.iter().enumerate() {
            for b in &tiles[i + 1..] {
                assert!(!a.overlaps(b), "{:?} vs {:?}", (a.row, a.col), (b.row, b.col));
            }
        }
        let err = sample_tiles(&raster(512), 5, 256, 11, OverlapPolicy::Disjoint).unwrap_err();
        assert!(matches!(err, Error::CapacityExhausted { requested: 5, max: 4 }));
    }

    #[test]
    fn free_tiles_stay_inside() {
        let tiles = sample_tiles(&raster(100), 50, 64, 1, OverlapPolicy::Free).unwrap();
        assert!(tiles.iter().all(|t| t.row + 64 <= 100 && t.col + 64 <= 100));
        assert_eq!(tiles, sample_tiles(&raster(100), 50, 64, 1, OverlapPolicy::Free).unwrap());
    }

    #[test]
    fn split_counts() {
        let tags = split_indices(10, 0.8, 5).unwrap();
        assert_eq!(tags.iter().filter(|&&s| s == Split::Train).count(), 8);
        assert_eq!(tags, split_indices(10, 0.8, 5).unwrap());
        assert_eq!((0.8f64 * 900_000.0).round() as usize, 720_000);
        assert!(split_indices(1, 0.8, 5).is_err());
        assert!(split_indices(10, 1.0, 5).is_err());
    }
}
