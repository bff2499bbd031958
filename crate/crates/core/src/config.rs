//! Flat TOML pipeline configuration. Key names carry their units.

use std::path::{Path, PathBuf};

use deepstreet_tensor::AdadeltaConfig;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mask::MaskGeometry;
use crate::raster::RoadClassTable;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub pixel_size_m: f64,
    pub tile_px: usize,
    pub hole_px: usize,
    pub center_min_px: usize,
    pub center_max_px: usize,
    /// Side of the local discriminator's crop.
    pub crop_px: usize,
    pub alpha: f64,
    pub batch_size: usize,
    pub generator_iters: usize,
    pub discriminator_iters: usize,
    pub joint_iters: usize,
    pub adadelta_rho: f32,
    pub adadelta_epsilon: f32,
    pub dem_min_m: f64,
    pub dem_max_m: f64,
    pub class1_width_m: f64,
    pub class2_width_m: f64,
    pub class3_width_m: f64,
    pub train_fraction: f64,
    pub seed: u64,
    pub network_scale: f64,
    pub generator_batch_norm: bool,
    pub discriminator_batch_norm: bool,
    /// Road-channel value written into the hole: 0 or 255.
    pub hole_fill: u8,
    /// Iterations between checkpoints inside a phase; 0 writes only at phase boundaries.
    pub checkpoint_every: usize,
    pub data_dir: PathBuf,
    pub checkpoint_dir: PathBuf,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            pixel_size_m: 5.0,
            tile_px: 256,
            hole_px: 48,
            center_min_px: 64,
            center_max_px: 192,
            crop_px: 64,
            alpha: 0.001,
            batch_size: 24,
            generator_iters: 900_000,
            discriminator_iters: 30_000,
            joint_iters: 900_000,
            adadelta_rho: 0.95,
            adadelta_epsilon: 1e-6,
            dem_min_m: 0.0,
            dem_max_m: 511.0,
            class1_width_m: 20.0,
            class2_width_m: 12.0,
            class3_width_m: 8.0,
            train_fraction: 0.8,
            seed: 0,
            network_scale: 1.0,
            generator_batch_norm: true,
            discriminator_batch_norm: false,
            hole_fill: 0,
            checkpoint_every: 0,
            data_dir: PathBuf::from("data"),
            checkpoint_dir: PathBuf::from("checkpoints"),
        }
    }
}

impl PipelineConfig {
    /// Small-tile settings that train on a single CPU core.
    pub fn desk() -> Self {
        Self {
            tile_px: 64,
            hole_px: 16,
            center_min_px: 16,
            center_max_px: 48,
            crop_px: 32,
            batch_size: 8,
            generator_iters: 2_000,
            discriminator_iters: 500,
            joint_iters: 2_000,
            network_scale: 0.125,
            ..Self::default()
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::parse("config", e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("flat config serializes")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text).map_err(|e| match e {
            Error::Parse { message, .. } => Error::parse(path.display().to_string(), message),
            other => other,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(self.pixel_size_m > 0.0) {
            return bad(format!("pixel_size_m {} must be positive", self.pixel_size_m));
        }
        self.mask_geometry().validate()?;
        if self.crop_px < self.hole_px || self.crop_px > self.tile_px {
            return bad(format!("crop_px {} must lie in [hole_px, tile_px]", self.crop_px));
        }
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return bad(format!("alpha {} must be non-negative", self.alpha));
        }
        if self.batch_size == 0 {
            return bad("batch_size must be positive".into());
        }
        if self.dem_min_m >= self.dem_max_m {
            return bad(format!("dem range [{}, {}] is empty", self.dem_min_m, self.dem_max_m));
        }
        if [self.class1_width_m, self.class2_width_m, self.class3_width_m].iter().any(|w| !(*w > 0.0)) {
            return bad("road widths must be positive".into());
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return bad(format!("train_fraction {} not in (0,1)", self.train_fraction));
        }
        if !(self.network_scale > 0.0 && self.network_scale <= 1.0) {
            return bad(format!("network_scale {} not in (0,1]", self.network_scale));
        }
        if self.hole_fill != 0 && self.hole_fill != 255 {
            return bad(format!("hole_fill {} must be 0 or 255", self.hole_fill));
        }
        self.adadelta().validate()?;
        Ok(())
    }

    pub fn mask_geometry(&self) -> MaskGeometry {
        MaskGeometry {
            tile_px: self.tile_px,
            hole_px: self.hole_px,
            center_min: self.center_min_px,
            center_max: self.center_max_px,
        }
    }

    pub fn road_classes(&self) -> RoadClassTable {
        RoadClassTable { widths_m: [self.class1_width_m, self.class2_width_m, self.class3_width_m] }
    }

    pub fn adadelta(&self) -> AdadeltaConfig {
        AdadeltaConfig { rho: self.adadelta_rho, epsilon: self.adadelta_epsilon }
    }
}
