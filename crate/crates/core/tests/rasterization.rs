mod common;

use deepstreet::raster::{encode_dem, sample_tiles, stroke_roads, CityRaster, DemGrid, OverlapPolicy, RasterGeometry};
use deepstreet::tile::{RasterImage, ROAD_MAJOR, ROAD_MINOR};
use deepstreet::Error;
use proptest::prelude::*;

fn codes(raster: &CityRaster) -> Vec<(u8, u8)> {
    let img = &raster.image;
    img.channel(ROAD_MAJOR).iter().zip(img.channel(ROAD_MINOR)).map(|(&a, &b)| (a, b)).collect()
}

#[test]
fn strokes_match_brute_force_on_fifty_sets() {
    let g = common::random_geometry(128);
    for seed in 0..50 {
        let segs = common::random_segments(seed, &g);
        let (raster, _) = stroke_roads(&segs, &g);
        let expected = common::stroke_oracle(&segs, &g);
        let diff = codes(&raster).iter().zip(&expected).filter(|(a, b)| a != b).count();
        assert_eq!(diff, 0, "seed {seed}: {diff} pixels differ");
    }
}

#[test]
fn higher_class_wins_on_overlap() {
    let g = RasterGeometry { origin_x: 0.0, origin_y: 50.0, pixel_size_m: 5.0, width: 10, height: 10 };
    let minor = deepstreet::raster::RoadSegment::new(vec![(0.0, 25.0), (50.0, 25.0)], deepstreet::raster::RoadClass::Class3, 8.0).unwrap();
    let major = deepstreet::raster::RoadSegment::new(vec![(25.0, 0.0), (25.0, 50.0)], deepstreet::raster::RoadClass::Class1, 8.0).unwrap();
    for order in [vec![minor.clone(), major.clone()], vec![major, minor]] {
        let (r, _) = stroke_roads(&order, &g);
        assert_eq!(r.image.road_code(4, 4), (255, 0));
        assert_eq!(r.image.road_code(4, 0), (0, 0));
        assert_eq!(r.image.road_code(0, 0), (255, 255));
    }
}

fn dem(values: Vec<f64>) -> DemGrid {
    let n = values.len();
    DemGrid::new(1, n, values, 30.0, (0.0, 30.0)).unwrap()
}

#[test]
fn dem_endpoints_are_exact() {
    let t = encode_dem(&dem(vec![0.0, 511.0]), 5.0, 0.0, 511.0).unwrap();
    assert_eq!((t[0], t[6]), (255, 0));
    let t = encode_dem(&dem(vec![-3.5, 1200.0]), 30.0, -3.5, 1200.0).unwrap();
    assert_eq!(t, vec![255, 0]);
}

proptest! {
    #[test]
    fn dem_encoding_is_monotone(mut e in prop::collection::vec(-100.0f64..700.0, 2..40)) {
        e.sort_by(f64::total_cmp);
        let codes = encode_dem(&dem(e.clone()), 30.0, 0.0, 511.0).unwrap();
        for pair in codes.windows(2) {
            prop_assert!(pair[0] >= pair[1]);
        }
    }

    #[test]
    fn disjoint_tiles_never_overlap(h in 64usize..300, w in 64usize..300, tile in 16usize..64, seed: u64, frac in 0.0f64..=1.0) {
        let raster = CityRaster {
            geometry: RasterGeometry { origin_x: 0.0, origin_y: 0.0, pixel_size_m: 5.0, width: w, height: h },
            image: RasterImage::blank(h, w, 7),
        };
        let cap = (h / tile) * (w / tile);
        let count = (frac * cap as f64) as usize;
        let tiles = sample_tiles(&raster, count, tile, seed, OverlapPolicy::Disjoint).unwrap();
        prop_assert_eq!(tiles.len(), count);
        for (i, a) in tiles.iter().enumerate() {
            prop_assert!(a.row + tile <= h && a.col + tile <= w);
            for b in &tiles[i + 1..] {
                prop_assert!(!a.overlaps(b), "{:?} {:?}", (a.row, a.col), (b.row, b.col));
            }
        }
        let over = sample_tiles(&raster, cap + 1, tile, seed, OverlapPolicy::Disjoint);
        let exhausted = matches!(over, Err(Error::CapacityExhausted { .. }));
        prop_assert!(exhausted);
    }
}
