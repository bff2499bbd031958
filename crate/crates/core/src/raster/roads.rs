use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{CityRaster, RasterGeometry};
use crate::error::{Error, Result};
use crate::tile::{RasterImage, ROAD_MAJOR, ROAD_MINOR, VOID};

/// Road hierarchy level; class1 is the highest.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum RoadClass {
    Class1,
    Class2,
    Class3,
}

impl RoadClass {
    pub const ALL: [RoadClass; 3] = [RoadClass::Class1, RoadClass::Class2, RoadClass::Class3];

    /// `(road_major, road_minor)` channel values.
    pub const fn code(self) -> (u8, u8) {
        match self {
            RoadClass::Class1 => (255, 0),
            RoadClass::Class2 => (0, 255),
            RoadClass::Class3 => (0, 0),
        }
    }

    pub fn from_code(code: (u8, u8)) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.code() == code)
    }

    /// Higher wins when strokes of different classes overlap.
    fn priority(self) -> u8 {
        match self {
            RoadClass::Class1 => 3,
            RoadClass::Class2 => 2,
            RoadClass::Class3 => 1,
        }
    }

    fn from_priority(p: u8) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.priority() == p)
    }

    fn index(self) -> usize {
        self as usize
    }
}

impl FromStr for RoadClass {
    type Err = String;

    /// Accepts `class1..class3` or an OSM `highway`/`railway` tag value.
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let tag = s.trim().to_ascii_lowercase();
        let tag = tag.strip_suffix("_link").unwrap_or(&tag);
        Ok(match tag {
            "class1" | "motorway" | "trunk" | "primary" => RoadClass::Class1,
            "class2" | "secondary" | "tertiary" => RoadClass::Class2,
            "class3" | "residential" | "service" | "unclassified" | "living_street" | "rail" => {
                RoadClass::Class3
            }
            other => return Err(format!("unknown road class or tag `{other}`")),
        })
    }
}

impl fmt::Display for RoadClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "class{}", self.index() + 1)
    }
}

/// Default stroke width per class, in meters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoadClassTable {
    pub widths_m: [f64; 3],
}

impl Default for RoadClassTable {
    fn default() -> Self {
        Self { widths_m: [20.0, 12.0, 8.0] }
    }
}

impl RoadClassTable {
    pub fn width_m(&self, class: RoadClass) -> f64 {
        self.widths_m[class.index()]
    }

    pub fn width_px(&self, class: RoadClass, pixel_size_m: f64) -> f64 {
        self.width_m(class) / pixel_size_m
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RoadSegment {
    pub polyline: Vec<(f64, f64)>,
    pub road_class: RoadClass,
    pub width_m: f64,
}

impl RoadSegment {
    pub fn new(polyline: Vec<(f64, f64)>, road_class: RoadClass, width_m: f64) -> Result<Self> {
        if polyline.len() < 2 {
            return Err(Error::Geometry("a road polyline needs at least two points".into()));
        }
        if !(width_m > 0.0 && width_m.is_finite()) {
            return Err(Error::Geometry(format!("road width {width_m} must be positive")));
        }
        if polyline.iter().any(|(x, y)| !x.is_finite() || !y.is_finite()) {
            return Err(Error::Geometry("non-finite polyline coordinate".into()));
        }
        Ok(Self { polyline, road_class, width_m })
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct StrokeStats {
    pub edges_drawn: usize,
    /// Zero-length edges, which are skipped.
    pub edges_skipped: usize,
}

/// Squared distance from `p` to the segment `a`-`b` (non-degenerate).
fn distance_sq(p: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let t = (((p.0 - a.0) * dx + (p.1 - a.1) * dy) / (dx * dx + dy * dy)).clamp(0.0, 1.0);
    let (qx, qy) = (a.0 + t * dx - p.0, a.1 + t * dy - p.1);
    qx * qx + qy * qy
}

/// Rasterizes road centerlines with their widths.
///
/// A pixel takes a class code iff its center lies within `width / 2` of an
/// edge of that class; overlaps resolve to the highest class. Everything else
/// is void `(255, 255)`. Strokes are clipped to the raster. The topo channel
/// of the result is left at 255.
pub fn stroke_roads(segments: &[RoadSegment], geometry: &RasterGeometry) -> (CityRaster, StrokeStats) {
    let (w, h, ps) = (geometry.width, geometry.height, geometry.pixel_size_m);
    let mut priority = vec![0u8; w * h];
    let mut stats = StrokeStats::default();
    for seg in segments {
        let radius = seg.width_m / 2.0;
        let r2 = radius * radius;
        let p = seg.road_class.priority();
        for pair in seg.polyline.windows(2) {
            let (a, b) = (pair[0], pair[1]);
            if a == b {
                stats.edges_skipped += 1;
                continue;
            }
            stats.edges_drawn += 1;
            // Column/row ranges whose centers can be within `radius` of the edge.
            let to_col = |x: f64| (x - geometry.origin_x) / ps - 0.5;
            let to_row = |y: f64| (geometry.origin_y - y) / ps - 0.5;
            let c_lo = to_col(a.0.min(b.0) - radius).floor().max(0.0);
            let c_hi = to_col(a.0.max(b.0) + radius).ceil().min(w as f64 - 1.0);
            let r_lo = to_row(a.1.max(b.1) + radius).floor().max(0.0);
            let r_hi = to_row(a.1.min(b.1) - radius).ceil().min(h as f64 - 1.0);
            if c_lo > c_hi || r_lo > r_hi {
                continue;
            }
            for row in r_lo as usize..=r_hi as usize {
                for col in c_lo as usize..=c_hi as usize {
                    let slot = &mut priority[row * w + col];
                    if *slot >= p {
                        continue;
                    }
                    if distance_sq(geometry.pixel_center(row, col), a, b) <= r2 {
                        *slot = p;
                    }
                }
            }
        }
    }
    let mut image = RasterImage::blank(h, w, 255);
    for (i, &p) in priority.iter().enumerate() {
        let (major, minor) = RoadClass::from_priority(p).map_or((VOID, VOID), RoadClass::code);
        image.channel_mut(ROAD_MAJOR)[i] = major;
        image.channel_mut(ROAD_MINOR)[i] = minor;
    }
    (CityRaster { geometry: *geometry, image }, stats)
}

/// Parses the line-delimited road format:
///
/// ```text
/// # comment
/// LINESTRING (0 0, 100 0, 100 50);class=primary;width_m=18
/// LINESTRING (0 10, 40 10);highway=residential
/// ```
///
/// `class` (or `highway`/`railway`) takes `class1..3` or an OSM tag; `width_m`
/// defaults to the class width from `table`.
pub fn parse_road_lines(text: &str, table: &RoadClassTable) -> Result<Vec<RoadSegment>> {
    let mut out = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let loc = format!("line {}", lineno + 1);
        let mut fields = line.split(';');
        let geom = fields.next().unwrap_or_default().trim();
        let polyline = parse_linestring(geom).map_err(|m| Error::parse(&loc, m))?;
        let (mut class, mut width) = (None, None);
        for attr in fields {
            let Some((key, value)) = attr.split_once('=') else {
                return Err(Error::parse(&loc, format!("attribute `{attr}` is not key=value")));
            };
            match key.trim() {
                "class" | "highway" | "railway" => {
                    class = Some(value.parse::<RoadClass>().map_err(|m| Error::parse(&loc, m))?)
                }
                "width_m" => {
                    width = Some(value.trim().parse::<f64>().map_err(|e| Error::parse(&loc, e.to_string()))?)
                }
                _ => {}
            }
        }
        let class = class.ok_or_else(|| Error::parse(&loc, "missing class attribute"))?;
        let width = width.unwrap_or_else(|| table.width_m(class));
        out.push(RoadSegment::new(polyline, class, width).map_err(|e| Error::parse(&loc, e.to_string()))?);
    }
    Ok(out)
}

fn parse_linestring(s: &str) -> std::result::Result<Vec<(f64, f64)>, String> {
    let body = s
        .strip_prefix("LINESTRING")
        .or_else(|| s.strip_prefix("linestring"))
        .ok_or("expected LINESTRING")?
        .trim();
    let body = body
        .strip_prefix('(')
        .and_then(|b| b.strip_suffix(')'))
        .ok_or("LINESTRING coordinates must be parenthesised")?;
    body.split(',')
        .map(|pt| {
            let mut it = pt.split_whitespace().map(str::parse::<f64>);
            match (it.next(), it.next(), it.next()) {
                (Some(Ok(x)), Some(Ok(y)), None) => Ok((x, y)),
                _ => Err(format!("bad coordinate `{}`", pt.trim())),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn geom(side: usize) -> RasterGeometry {
        RasterGeometry { origin_x: 0.0, origin_y: side as f64 * 5.0, pixel_size_m: 5.0, width: side, height: side }
    }

    fn seg(points: &[(f64, f64)], class: RoadClass, width: f64) -> RoadSegment {
        RoadSegment::new(points.to_vec(), class, width).unwrap()
    }

    #[test]
    fn no_segments_is_all_void() {
        let (r, stats) = stroke_roads(&[], &geom(16));
        assert!((0..16).all(|row| (0..16).all(|col| r.image.road_code(row, col) == (255, 255))));
        assert_eq!(stats, StrokeStats::default());
    }

    #[test]
    fn ten_meter_road_on_a_pixel_boundary_is_two_pixels_thick() {
        // y = 30 m lies between rows 9 and 10 when origin_y = 80.
        let g = geom(16);
        let (r, _) = stroke_roads(&[seg(&[(0.0, 30.0), (80.0, 30.0)], RoadClass::Class1, 10.0)], &g);
        let rows: Vec<usize> = (0..16).filter(|&row| r.image.road_code(row, 8) == (255, 0)).collect();
        assert_eq!(rows, [9, 10]);
        assert!((0..16).all(|col| r.image.road_code(9, col) == (255, 0)));
    }

    #[test]
    fn higher_class_wins_overlaps() {
        let g = geom(16);
        let road = [(0.0, 40.0), (80.0, 40.0)];
        let (r, _) = stroke_roads(
            &[seg(&road, RoadClass::Class3, 20.0), seg(&road, RoadClass::Class1, 10.0)],
            &g,
        );
        // Class1 covers 2 rows, class3 covers 4; the shared rows carry class1.
        let codes: Vec<_> = (0..16).map(|row| r.image.road_code(row, 3)).collect();
        assert_eq!(codes.iter().filter(|&&c| c == (255, 0)).count(), 2);
        assert_eq!(codes.iter().filter(|&&c| c == (0, 0)).count(), 2);
    }

    #[test]
    fn zero_length_edges_are_counted_and_skipped() {
        let (_, stats) = stroke_roads(&[seg(&[(5.0, 5.0), (5.0, 5.0), (20.0, 5.0)], RoadClass::Class2, 5.0)], &geom(8));
        assert_eq!(stats, StrokeStats { edges_drawn: 1, edges_skipped: 1 });
    }

    #[test]
    fn segment_invariants() {
        assert!(RoadSegment::new(vec![(0.0, 0.0)], RoadClass::Class1, 5.0).is_err());
        assert!(RoadSegment::new(vec![(0.0, 0.0), (1.0, 1.0)], RoadClass::Class1, 0.0).is_err());
    }

    #[test]
    fn parses_osm_tags_and_default_widths() {
        let text = "# roads\nLINESTRING (0 0, 100 0);highway=primary\nLINESTRING(1 2, 3 4, 5 6);class=class3;width_m=4.5\n";
        let segs = parse_road_lines(text, &RoadClassTable::default()).unwrap();
        assert_eq!(segs.len(), 2);
        assert_eq!((segs[0].road_class, segs[0].width_m), (RoadClass::Class1, 20.0));
        assert_eq!(segs[1].polyline, vec![(1.0, 2.0), (3.0, 4.0), (5.0, 6.0)]);
        assert_eq!(segs[1].width_m, 4.5);
        assert!("tertiary".parse::<RoadClass>() == Ok(RoadClass::Class2));
        assert!("rail".parse::<RoadClass>() == Ok(RoadClass::Class3));
    }

    #[test]
    fn parse_errors_name_the_line() {
        let err = parse_road_lines("\nLINESTRING (0 0, 1 1);class=footpath", &RoadClassTable::default()).unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");
        assert!(parse_road_lines("POINT (0 0);class=class1", &RoadClassTable::default()).is_err());
    }
}
