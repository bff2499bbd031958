//! Complete one tile with a checkpoint (or a freshly initialized network) and
//! write the PNG, its sidecar and the raw generator output.
//!
//! cargo run --release --example complete_tile -- [checkpoint] [out.png]

use std::path::PathBuf;

use deepstreet::checkpoint;
use deepstreet::completion::{complete_request, write_completion, CompletionRequest};
use deepstreet::evaluation::boundary_stub_connectivity;
use deepstreet::network::{Model, NetworkConfig};
use deepstreet::synth::gridiron_set;
use deepstreet::{HoleRect, Mask, PipelineConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let (model, name) = match args.next() {
        Some(path) => (checkpoint::load(path.as_ref())?.0, path),
        None => (Model::build(NetworkConfig::from_pipeline(&PipelineConfig::desk()))?, "untrained".to_string()),
    };
    let out = PathBuf::from(args.next().unwrap_or_else(|| "completed.png".into()));
    let side = model.config.tile_px;
    let tile = gridiron_set(1, side, 21)?.remove(0);
    let hole = HoleRect::centered(side / 2, side / 2, side / 4, side / 4)?;
    let req = CompletionRequest { tile, mask: Mask::rect(side, side, hole)?, emit_intermediate: true };
    let done = complete_request(&model, &req, 0)?;
    write_completion(&out, &done, &name, &req.mask)?;
    done.raw.as_ref().unwrap().save_png(&out.with_extension("raw.png"))?;
    println!(
        "{}: {:.1} ms, connectivity proxy {:.3}",
        out.display(),
        done.elapsed_ms,
        boundary_stub_connectivity(&done.tile, &req.mask)?
    );
    Ok(())
}
