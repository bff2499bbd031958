use deepstreet::evaluation::{blank_context_detector, boundary_stub_connectivity, hole_mse, ring_road_fraction};
use deepstreet::mask::{HoleRect, Mask};
use deepstreet::tile::{RasterImage, CHANNELS, ROAD_MAJOR, ROAD_MINOR};
use proptest::prelude::*;

const SIDE: usize = 24;

/// Binary road tile from a bitmap.
fn roads(bits: &[bool]) -> RasterImage {
    let mut t = RasterImage::blank(SIDE, SIDE, 100);
    for (i, &b) in bits.iter().enumerate() {
        if b {
            t.channel_mut(ROAD_MAJOR)[i] = 0;
            t.channel_mut(ROAD_MINOR)[i] = 0;
        }
    }
    t
}

fn arb_hole() -> impl Strategy<Value = HoleRect> {
    (0..SIDE - 1, 0..SIDE - 1)
        .prop_flat_map(|(r, c)| (Just(r), Just(c), 1..=SIDE - r, 1..=SIDE - c))
        .prop_map(|(r, c, h, w)| HoleRect { row0: r, col0: c, height: h, width: w })
}

/// Same rotation as `RasterImage::rotate90` (clockwise).
fn rotate_hole(h: HoleRect, side: usize) -> HoleRect {
    HoleRect { row0: h.col0, col0: side - h.row0 - h.height, height: h.width, width: h.height }
}

proptest! {
    #[test]
    fn connectivity_is_rotation_invariant(bits in prop::collection::vec(prop::bool::weighted(0.3), SIDE * SIDE), hole in arb_hole()) {
        let mut tile = roads(&bits);
        let mut hole = hole;
        let base = boundary_stub_connectivity(&tile, &Mask::rect(SIDE, SIDE, hole).unwrap()).unwrap();
        prop_assert!((0.0..=1.0).contains(&base));
        for _ in 0..3 {
            tile = tile.rotate90();
            hole = rotate_hole(hole, SIDE);
            let got = boundary_stub_connectivity(&tile, &Mask::rect(SIDE, SIDE, hole).unwrap()).unwrap();
            prop_assert_eq!(got, base);
        }
    }

    #[test]
    fn adding_context_roads_never_makes_a_ring_blank(
        bits in prop::collection::vec(prop::bool::weighted(0.02), SIDE * SIDE),
        extra in prop::collection::vec(prop::bool::weighted(0.05), SIDE * SIDE),
        hole in arb_hole(),
        threshold in 0.0f64..0.1,
    ) {
        let mask = Mask::rect(SIDE, SIDE, hole).unwrap();
        let sparse = roads(&bits);
        let both: Vec<bool> = bits.iter().zip(&extra).map(|(a, b)| *a || *b).collect();
        let dense = roads(&both);
        prop_assert!(ring_road_fraction(&dense, &mask) >= ring_road_fraction(&sparse, &mask));
        if !blank_context_detector(&sparse, &mask, threshold).unwrap() {
            prop_assert!(!blank_context_detector(&dense, &mask, threshold).unwrap());
        }
        if blank_context_detector(&sparse, &mask, threshold).unwrap() {
            prop_assert!(blank_context_detector(&sparse, &mask, threshold + 0.01).unwrap());
        }
    }

    #[test]
    fn hole_mse_is_symmetric(
        a in prop::collection::vec(any::<u8>(), CHANNELS * SIDE * SIDE),
        b in prop::collection::vec(any::<u8>(), CHANNELS * SIDE * SIDE),
        hole in arb_hole(),
    ) {
        let (a, b) = (RasterImage::from_planes(SIDE, SIDE, a).unwrap(), RasterImage::from_planes(SIDE, SIDE, b).unwrap());
        let mask = Mask::rect(SIDE, SIDE, hole).unwrap();
        let ab = hole_mse(&a, &b, &mask).unwrap();
        prop_assert_eq!(ab, hole_mse(&b, &a, &mask).unwrap());
        prop_assert!(ab >= 0.0);
        prop_assert_eq!(hole_mse(&a, &a, &mask).unwrap(), 0.0);
    }
}
