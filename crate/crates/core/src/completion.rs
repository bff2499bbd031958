//! Inference: fill the hole of a tile with a trained generator.

use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mask::{HoleRect, Mask};
use crate::network::{assemble_input, restore_context, Model};
use crate::tile::{threshold_roads, Tile};

#[derive(Clone, Debug, PartialEq)]
pub struct CompletionRequest {
    pub tile: Tile,
    pub mask: Mask,
    /// Keep the raw (unrestored) generator output.
    pub emit_intermediate: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Completion {
    pub tile: Tile,
    /// Quantized generator output before context restoration.
    pub raw: Option<Tile>,
    /// Wall-clock time of the forward pass.
    pub elapsed_ms: f64,
}

impl Completion {
    /// Road channels snapped to {0, 255}, as used by the connectivity metric.
    pub fn thresholded(&self) -> Tile {
        threshold_roads(&self.tile)
    }
}

/// Side record written next to a completed PNG.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    pub checkpoint: String,
    pub mask: Option<HoleRect>,
    pub elapsed_ms: f64,
}

/// normalize, mask, append the mask plane, run the generator, restore context, quantize.
pub fn complete(model: &Model, tile: &Tile, mask: &Mask, hole_fill: u8) -> Result<Completion> {
    complete_request(model, &CompletionRequest { tile: tile.clone(), mask: *mask, emit_intermediate: false }, hole_fill)
}

pub fn complete_request(model: &Model, req: &CompletionRequest, hole_fill: u8) -> Result<Completion> {
    req.mask.check_tile(&req.tile)?;
    let side = model.config.tile_px;
    if req.tile.side() != Some(side) {
        return Err(Error::Geometry(format!(
            "model expects {side}x{side} tiles, got {}x{}",
            req.tile.height(),
            req.tile.width()
        )));
    }
    let input = assemble_input(&[&req.tile], &[req.mask], hole_fill)?;
    let start = Instant::now();
    let out = model.generate(&input)?;
    let elapsed_ms = start.elapsed().as_secs_f64() * 1e3;
    let raw = Tile::from_tensor(&out)?;
    let tile = restore_context(&raw, &req.tile, &req.mask)?;
    Ok(Completion { tile, raw: req.emit_intermediate.then_some(raw), elapsed_ms })
}

/// Order-preserving; a failing request yields its own error and does not affect the others.
pub fn batch_complete(model: &Model, requests: &[CompletionRequest], hole_fill: u8) -> Vec<Result<Completion>> {
    requests.iter().map(|r| complete_request(model, r, hole_fill)).collect()
}

/// Writes `<path>` (PNG) and `<path>.json` (sidecar).
pub fn write_completion(path: &Path, completion: &Completion, checkpoint: &str, mask: &Mask) -> Result<()> {
    completion.tile.save_png(path)?;
    let sidecar = Sidecar { checkpoint: checkpoint.to_string(), mask: mask.hole, elapsed_ms: completion.elapsed_ms };
    let json_path = path.with_extension("json");
    let json = serde_json::to_string_pretty(&sidecar).expect("sidecar serializes");
    std::fs::write(&json_path, json).map_err(|e| Error::io(json_path, e))
}
