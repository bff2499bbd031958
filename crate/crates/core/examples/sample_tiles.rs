//! Cut disjoint tiles from a synthetic city, split them 80/20 and write a manifest.
//!
//! cargo run --example sample_tiles -- [out_dir]

use std::path::PathBuf;

use deepstreet::raster::{
    encode_dem, sample_tiles, split_dataset, stroke_roads, Manifest, ManifestHeader, ManifestRecord, OverlapPolicy,
    Split,
};
use deepstreet::synth::synthetic_city;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "dataset".into()));
    let (roads, dem) = synthetic_city(600, 5);
    let geometry = dem.raster_geometry(5.0)?;
    let (mut city, _) = stroke_roads(&roads, &geometry);
    city.set_topo(&encode_dem(&dem, 5.0, 0.0, 511.0)?)?;

    let mut tiles = sample_tiles(&city, 20, 64, 9, OverlapPolicy::Disjoint)?;
    split_dataset(&mut tiles, 0.8, 9)?;
    std::fs::create_dir_all(out.join("tiles"))?;
    let mut records = Vec::new();
    for t in &tiles {
        let path = PathBuf::from(format!("tiles/t{:04}.png", t.id));
        t.tile.save_png(&out.join(&path))?;
        records.push(ManifestRecord { id: format!("t{:04}", t.id), row: t.row, col: t.col, split: t.split, path, hole: None });
    }
    let manifest = Manifest {
        header: ManifestHeader { pixel_size_m: 5.0, tile_px: 64, dem_min_m: 0.0, dem_max_m: 511.0, seed: 9 },
        records,
    };
    manifest.save(&out.join("manifest.tsv"))?;
    println!(
        "{} tiles from a {}x{} raster: {} train, {} test",
        tiles.len(),
        geometry.width,
        geometry.height,
        manifest.split(Split::Train).count(),
        manifest.split(Split::Test).count()
    );
    let overlapping = tiles.iter().enumerate().any(|(i, a)| tiles[i + 1..].iter().any(|b| a.overlaps(b)));
    println!("any overlap: {overlapping}");
    Ok(())
}
