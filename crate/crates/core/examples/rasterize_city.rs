//! Roads in the line-delimited text format plus an ASCII-grid DEM become a
//! three-channel city raster: road class codes and inverted elevation.
//!
//! cargo run --example rasterize_city -- [out.png]

use deepstreet::raster::{encode_dem, parse_road_lines, stroke_roads, DemGrid, RoadClassTable};
use deepstreet::tile::TOPO;

const ROADS: &str = "\
# x y in meters
LINESTRING (0 200, 400 200);highway=primary
LINESTRING (200 0, 200 400);highway=secondary
LINESTRING (0 80, 400 320);highway=residential
LINESTRING (320 0, 320 400);class=class3;width_m=5
";

fn dem_text() -> String {
    let mut s = String::from("ncols 14\nnrows 14\nxllcorner 0\nyllcorner -20\ncellsize 30\n");
    for r in 0..14 {
        let row: Vec<String> = (0..14).map(|c| format!("{}", 40 + 6 * c + 3 * (13 - r))).collect();
        s.push_str(&row.join(" "));
        s.push('\n');
    }
    s
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = std::env::args().nth(1).unwrap_or_else(|| "city.png".into());
    let roads = parse_road_lines(ROADS, &RoadClassTable::default())?;
    let dem = DemGrid::parse_ascii_grid(&dem_text())?;
    let geometry = dem.raster_geometry(5.0)?;
    let (mut city, stats) = stroke_roads(&roads, &geometry);
    city.set_topo(&encode_dem(&dem, 5.0, 0.0, 511.0)?)?;
    city.image.save_png(std::path::Path::new(&out))?;

    let img = &city.image;
    let road_px = (0..img.height()).flat_map(|r| (0..img.width()).map(move |c| (r, c))).filter(|&(r, c)| img.is_road(r, c)).count();
    println!("{out}: {}x{} px, {} edges, {road_px} road pixels", img.width(), img.height(), stats.edges_drawn);
    println!("class1 pixel code at the crossing: {:?}", img.road_code(img.height() / 2 - 2, 4));
    println!("topo range {}..{}", img.channel(TOPO).iter().min().unwrap(), img.channel(TOPO).iter().max().unwrap());
    Ok(())
}
