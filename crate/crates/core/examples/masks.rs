//! Random generation regions, mask images and masking a tile.
//!
//! cargo run --example masks

use deepstreet::synth::gridiron_set;
use deepstreet::tile::{ROAD_MAJOR, TOPO};
use deepstreet::{apply_mask, random_mask, HoleRect, Mask, MaskGeometry};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    for seed in 0..3 {
        let m = random_mask(&MaskGeometry::PAPER, seed)?;
        let h = m.hole.unwrap();
        println!("seed {seed}: hole at ({}, {}) centered {:?}, {} zeros", h.row0, h.col0, h.center(), m.zero_count());
    }
    // The designer preset: a 48-pixel hole centered at (128, 128).
    let preset = HoleRect::centered(128, 128, 48, 48)?;
    println!("preset rectangle {:?}", (preset.row0, preset.col0, preset.height, preset.width));

    let tile = gridiron_set(1, 64, 3)?.remove(0);
    let mask = Mask::rect(64, 64, HoleRect::centered(32, 32, 16, 16)?)?;
    let masked = apply_mask(&tile, &mask, 0)?;
    println!("road value inside the hole: {}", masked.get(ROAD_MAJOR, 32, 32));
    println!("topo untouched: {}", masked.channel(TOPO) == tile.channel(TOPO));
    let back = Mask::from_gray(&mask.to_gray())?;
    println!("mask image round-trips: {}", back == mask);
    Ok(())
}
