//! Procedural gridiron street networks over sloped terrain, for tests, demos and
//! desk-scale training.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::raster::{encode_dem, stroke_roads, DemGrid, RasterGeometry, RoadClass, RoadSegment};
use crate::tile::{Tile, CHANNELS};

/// A regular orthogonal grid. Every `major_every`-th line is class1, the rest class3.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridSpec {
    pub spacing_m: f64,
    pub offset_m: (f64, f64),
    pub major_every: usize,
    pub minor_width_m: f64,
    pub major_width_m: f64,
    /// Centerlines stop `extent_m.0` meters from the left edge and `extent_m.1`
    /// from the top edge; `None` covers everything.
    pub extent_m: Option<(f64, f64)>,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            spacing_m: 80.0,
            offset_m: (0.0, 0.0),
            major_every: 3,
            minor_width_m: 10.0,
            major_width_m: 20.0,
            extent_m: None,
        }
    }
}

/// Linear terrain: `base + slope_x * x + slope_y * y` meters, sampled on 30 m cells.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Slope {
    pub base_m: f64,
    pub slope_x: f64,
    pub slope_y: f64,
}

/// Road segments of the grid covering a `width_m x height_m` area whose top-left corner is (0, height_m).
pub fn grid_segments(spec: &GridSpec, width_m: f64, height_m: f64) -> Vec<RoadSegment> {
    let (x_end, y_start) = spec.extent_m.map_or((width_m, 0.0), |(x, y)| (x.min(width_m), height_m - y.min(height_m)));
    let mut segs = Vec::new();
    let class_of = |k: i64, every: usize| {
        if every > 0 && k.rem_euclid(every as i64) == 0 {
            (RoadClass::Class1, spec.major_width_m)
        } else {
            (RoadClass::Class3, spec.minor_width_m)
        }
    };
    let first = |offset: f64| ((-offset) / spec.spacing_m).floor() as i64 - 1;
    let mut k = first(spec.offset_m.0);
    loop {
        let x = spec.offset_m.0 + k as f64 * spec.spacing_m;
        if x > x_end + spec.major_width_m {
            break;
        }
        if x <= x_end {
            let (class, w) = class_of(k, spec.major_every);
            segs.push(RoadSegment::new(vec![(x, y_start), (x, height_m)], class, w).expect("valid grid line"));
        }
        k += 1;
    }
    let mut k = first(spec.offset_m.1);
    loop {
        let depth = spec.offset_m.1 + k as f64 * spec.spacing_m;
        let y = height_m - depth;
        if y < y_start - spec.major_width_m {
            break;
        }
        if y >= y_start {
            let (class, w) = class_of(k, spec.major_every);
            segs.push(RoadSegment::new(vec![(0.0, y), (x_end, y)], class, w).expect("valid grid line"));
        }
        k += 1;
    }
    segs
}

/// DEM covering `side` pixels at `pixel_size_m`, with 30 m cells.
pub fn sloped_dem(side: usize, pixel_size_m: f64, slope: Slope) -> DemGrid {
    let cell = 6.0 * pixel_size_m;
    let n = side.div_ceil(6);
    let elevations = (0..n)
        .flat_map(|r| (0..n).map(move |c| (r, c)))
        .map(|(r, c)| slope.base_m + slope.slope_x * (c as f64 + 0.5) * cell + slope.slope_y * (r as f64 + 0.5) * cell)
        .collect();
    DemGrid::new(n, n, elevations, cell, (0.0, n as f64 * cell)).expect("finite slope")
}

/// Rasterized grid over sloped terrain, as a `side x side` tile.
pub fn gridiron_tile(side: usize, pixel_size_m: f64, spec: &GridSpec, slope: Slope) -> Result<Tile> {
    let extent = side as f64 * pixel_size_m;
    let geometry = RasterGeometry { origin_x: 0.0, origin_y: extent, pixel_size_m, width: side, height: side };
    let (mut raster, _) = stroke_roads(&grid_segments(spec, extent, extent), &geometry);
    let dem = sloped_dem(side, pixel_size_m, slope);
    let topo = encode_dem(&dem, pixel_size_m, 0.0, 511.0)?;
    let full = dem.cols * 6;
    let cropped: Vec<u8> = (0..side).flat_map(|r| topo[r * full..r * full + side].iter().copied()).collect();
    raster.set_topo(&cropped)?;
    Ok(raster.image)
}

/// `count` varied gridiron tiles: random offsets and terrain, every fourth
/// tile with roads confined to a corner so part of it is blank.
pub fn gridiron_set(count: usize, side: usize, seed: u64) -> Result<Vec<Tile>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pixel = 5.0;
    let extent = side as f64 * pixel;
    (0..count)
        .map(|i| {
            let spec = GridSpec {
                offset_m: (rng.random_range(0.0..80.0), rng.random_range(0.0..80.0)),
                extent_m: (i % 4 == 3).then(|| (extent * rng.random_range(0.4..0.7), extent * rng.random_range(0.4..0.7))),
                ..GridSpec::default()
            };
            let slope = Slope {
                base_m: rng.random_range(20.0..200.0),
                slope_x: rng.random_range(-0.2..0.2),
                slope_y: rng.random_range(-0.2..0.2),
            };
            gridiron_tile(side, pixel, &spec, slope)
        })
        .collect()
}

/// A whole synthetic city: grid roads over a larger area plus its DEM.
pub fn synthetic_city(side_px: usize, seed: u64) -> (Vec<RoadSegment>, DemGrid) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let extent = side_px as f64 * 5.0;
    let spec = GridSpec {
        offset_m: (rng.random_range(0.0..80.0), rng.random_range(0.0..80.0)),
        extent_m: Some((extent * 0.8, extent * 0.85)),
        ..GridSpec::default()
    };
    let slope = Slope { base_m: 10.0, slope_x: 0.05, slope_y: 0.1 };
    (grid_segments(&spec, extent, extent), sloped_dem(side_px, 5.0, slope))
}

/// Fake with the same pixel values as `tile` at shuffled positions (all channels move together).
pub fn scramble(tile: &Tile, seed: u64) -> Tile {
    let (h, w) = (tile.height(), tile.width());
    let mut order: Vec<usize> = (0..h * w).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut out = tile.clone();
    for c in 0..CHANNELS {
        let src = tile.channel(c);
        let dst = out.channel_mut(c);
        for (i, &j) in order.iter().enumerate() {
            dst[i] = src[j];
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tile::TOPO;

    #[test]
    fn grid_tiles_are_valid_and_varied() {
        let tiles = gridiron_set(8, 64, 1).unwrap();
        assert_eq!(tiles.len(), 8);
        for t in &tiles {
            assert!(t.roads_are_binary());
            let roads = (0..64).flat_map(|r| (0..64).map(move |c| (r, c))).filter(|&(r, c)| t.is_road(r, c)).count();
            assert!(roads > 200 && roads < 64 * 64 - 500, "{roads}");
        }
        assert_ne!(tiles[0], tiles[1]);
        assert_eq!(tiles, gridiron_set(8, 64, 1).unwrap());
    }

    #[test]
    fn clipped_grid_leaves_a_blank_corner() {
        let spec = GridSpec { extent_m: Some((100.0, 100.0)), ..GridSpec::default() };
        let slope = Slope { base_m: 0.0, slope_x: 0.0, slope_y: 0.0 };
        let t = gridiron_tile(64, 5.0, &spec, slope).unwrap();
        assert!((30..64).all(|r| (30..64).all(|c| !t.is_road(r, c))));
        assert!(t.channel(TOPO).iter().all(|&v| v == 255));
    }

    #[test]
    fn scramble_preserves_the_histogram() {
        let t = gridiron_set(1, 32, 4).unwrap().remove(0);
        let s = scramble(&t, 9);
        let hist = |t: &Tile| {
            let mut v: Vec<(u8, u8, u8)> = (0..32)
                .flat_map(|r| (0..32).map(move |c| (r, c)))
                .map(|(r, c)| (t.get(0, r, c), t.get(1, r, c), t.get(2, r, c)))
                .collect();
            v.sort();
            v
        };
        assert_eq!(hist(&t), hist(&s));
        assert_ne!(t, s);
    }
}
