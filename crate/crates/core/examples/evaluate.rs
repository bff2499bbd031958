//! Hole MSE, boundary-stub connectivity, the blank-context detector and
//! three-panel montages for a handful of completions.
//!
//! cargo run --release --example evaluate -- [checkpoint] [out_dir]

use std::path::PathBuf;

use deepstreet::checkpoint;
use deepstreet::completion::complete;
use deepstreet::evaluation::{evaluate_tile, EvalReport};
use deepstreet::network::{Model, NetworkConfig};
use deepstreet::synth::gridiron_set;
use deepstreet::{apply_mask, random_mask, MaskGeometry, PipelineConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let model = match args.next().filter(|a| a != "-") {
        Some(path) => checkpoint::load(path.as_ref())?.0,
        None => Model::build(NetworkConfig::from_pipeline(&PipelineConfig::desk()))?,
    };
    let out = PathBuf::from(args.next().unwrap_or_else(|| "eval".into()));
    std::fs::create_dir_all(&out)?;
    let geom = MaskGeometry { tile_px: model.config.tile_px, ..MaskGeometry::DESK };
    let mut report = EvalReport::default();
    for (i, truth) in gridiron_set(4, geom.tile_px, 1)?.iter().enumerate() {
        let mask = random_mask(&geom, i as u64)?;
        let completed = complete(&model, truth, &mask, 0)?.tile;
        let masked = apply_mask(truth, &mask, 0)?;
        report.records.push(evaluate_tile(&format!("g{i}"), truth, &masked, &completed, &mask, Some(&out))?);
    }
    report.save(&out.join("report.tsv"))?;
    print!("{}", report.to_tsv());
    Ok(())
}
