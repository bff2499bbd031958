//! Independent reference implementations used by the integration tests.
#![allow(dead_code)]

use deepstreet::raster::{RasterGeometry, RoadClass, RoadSegment};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Distance from `p` to segment `ab`, measured as perpendicular distance when the
/// foot of the perpendicular falls on the segment and endpoint distance otherwise.
pub fn segment_distance(p: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    let len = ((b.0 - a.0).powi(2) + (b.1 - a.1).powi(2)).sqrt();
    let (ux, uy) = ((b.0 - a.0) / len, (b.1 - a.1) / len);
    let along = (p.0 - a.0) * ux + (p.1 - a.1) * uy;
    if along < 0.0 {
        (p.0 - a.0).hypot(p.1 - a.1)
    } else if along > len {
        (p.0 - b.0).hypot(p.1 - b.1)
    } else {
        ((p.0 - a.0) * uy - (p.1 - a.1) * ux).abs()
    }
}

fn rank(class: RoadClass) -> u8 {
    match class {
        RoadClass::Class1 => 3,
        RoadClass::Class2 => 2,
        RoadClass::Class3 => 1,
    }
}

/// Brute force over every pixel and every edge: `(road_major, road_minor)` per pixel.
pub fn stroke_oracle(segments: &[RoadSegment], g: &RasterGeometry) -> Vec<(u8, u8)> {
    let mut out = Vec::with_capacity(g.width * g.height);
    for row in 0..g.height {
        for col in 0..g.width {
            let p = (g.origin_x + (col as f64 + 0.5) * g.pixel_size_m, g.origin_y - (row as f64 + 0.5) * g.pixel_size_m);
            let mut best: Option<RoadClass> = None;
            for s in segments {
                let hit = s
                    .polyline
                    .windows(2)
                    .filter(|e| e[0] != e[1])
                    .any(|e| segment_distance(p, e[0], e[1]) <= s.width_m / 2.0);
                if hit && best.is_none_or(|b| rank(s.road_class) > rank(b)) {
                    best = Some(s.road_class);
                }
            }
            out.push(match best {
                Some(RoadClass::Class1) => (255, 0),
                Some(RoadClass::Class2) => (0, 255),
                Some(RoadClass::Class3) => (0, 0),
                None => (255, 255),
            });
        }
    }
    out
}

pub fn random_geometry(side: usize) -> RasterGeometry {
    RasterGeometry { origin_x: 431_250.0, origin_y: 4_581_000.0, pixel_size_m: 5.0, width: side, height: side }
}

/// 1 to 6 polylines with 2 to 5 vertices, some reaching past the raster edge.
pub fn random_segments(seed: u64, g: &RasterGeometry) -> Vec<RoadSegment> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (w, h) = (g.width as f64 * g.pixel_size_m, g.height as f64 * g.pixel_size_m);
    let n = rng.random_range(1..=6);
    (0..n)
        .map(|_| {
            let pts = rng.random_range(2..=5);
            let poly = (0..pts)
                .map(|_| {
                    (
                        g.origin_x + rng.random_range(-0.1 * w..1.1 * w),
                        g.origin_y - rng.random_range(-0.1 * h..1.1 * h),
                    )
                })
                .collect();
            let class = RoadClass::ALL[rng.random_range(0..3)];
            RoadSegment::new(poly, class, rng.random_range(2.0..25.0)).unwrap()
        })
        .collect()
}
