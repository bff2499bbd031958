//! Generator (dilated encoder-decoder) and the global+local context discriminator.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use deepstreet_tensor::{ChannelStats, ConvGeometry, Tape, Tensor, Var};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use crate::config::PipelineConfig;
use crate::error::{Error, Result};
use crate::mask::{apply_mask, HoleRect, Mask};
use crate::tile::{normalize, Tile, CHANNELS};

/// Generator input planes: three tile channels plus the mask.
pub const INPUT_CHANNELS: usize = 4;
pub const BN_EPS: f32 = 1e-5;
pub const BN_MOMENTUM: f32 = 0.1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum LayerKind {
    Conv,
    DilatedConv,
    Deconv,
    OutputConv,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct LayerSpec {
    pub kind: LayerKind,
    pub kernel: usize,
    pub stride: usize,
    pub dilation: usize,
    pub padding: usize,
    pub out_channels: usize,
}

impl LayerSpec {
    fn conv(kernel: usize, stride: usize, out_channels: usize) -> Self {
        let padding = if stride == 1 { (kernel - 1) / 2 } else { 1 };
        Self { kind: LayerKind::Conv, kernel, stride, dilation: 1, padding, out_channels }
    }

    fn dilated(dilation: usize, out_channels: usize) -> Self {
        Self { kind: LayerKind::DilatedConv, kernel: 3, stride: 1, dilation, padding: dilation, out_channels }
    }

    fn deconv(out_channels: usize) -> Self {
        Self { kind: LayerKind::Deconv, kernel: 4, stride: 2, dilation: 1, padding: 1, out_channels }
    }

    pub fn geometry(&self) -> ConvGeometry {
        ConvGeometry::new(self.stride, self.dilation, self.padding)
    }

    /// Spatial extent after this layer, `None` if the kernel does not fit.
    pub fn output_extent(&self, input: usize) -> Option<usize> {
        match self.kind {
            LayerKind::Deconv => self.geometry().transpose_extent(input, self.kernel),
            _ => self.geometry().output_extent(input, self.kernel),
        }
    }
}

fn scaled(base: usize, scale: f64) -> Result<usize> {
    let w = (base as f64 * scale).round() as usize;
    if w == 0 {
        return Err(Error::Config(format!("network scale {scale} shrinks a {base}-channel layer to zero")));
    }
    Ok(w)
}

/// The 17-layer completion network.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct GeneratorSpec {
    pub layers: Vec<LayerSpec>,
    pub in_channels: usize,
}

impl GeneratorSpec {
    pub fn new(scale: f64) -> Result<Self> {
        let w = |base| scaled(base, scale);
        let mut layers = vec![
            LayerSpec::conv(5, 1, w(64)?),
            LayerSpec::conv(3, 2, w(128)?),
            LayerSpec::conv(3, 1, w(128)?),
            LayerSpec::conv(3, 2, w(256)?),
            LayerSpec::conv(3, 1, w(256)?),
            LayerSpec::conv(3, 1, w(256)?),
        ];
        for d in [2, 4, 8, 16] {
            layers.push(LayerSpec::dilated(d, w(256)?));
        }
        layers.extend([
            LayerSpec::conv(3, 1, w(256)?),
            LayerSpec::conv(3, 1, w(256)?),
            LayerSpec::deconv(w(128)?),
            LayerSpec::conv(3, 1, w(128)?),
            LayerSpec::deconv(w(64)?),
            LayerSpec::conv(3, 1, w(32)?),
            LayerSpec { kind: LayerKind::OutputConv, ..LayerSpec::conv(3, 1, CHANNELS) },
        ]);
        Ok(Self { layers, in_channels: INPUT_CHANNELS })
    }

    pub fn out_channels(&self) -> usize {
        self.layers.last().map_or(0, |l| l.out_channels)
    }

    /// Symbolic shape propagation: `(channels, side)` after each layer, starting from the input.
    pub fn shapes(&self, side: usize) -> Result<Vec<(usize, usize)>> {
        let mut out = vec![(self.in_channels, side)];
        let mut s = side;
        for (i, l) in self.layers.iter().enumerate() {
            s = l
                .output_extent(s)
                .ok_or_else(|| Error::Geometry(format!("generator layer {i} does not fit a {s}-pixel map")))?;
            out.push((l.out_channels, s));
        }
        Ok(out)
    }
}

/// Global branch over the whole tile, local branch over the crop around the hole.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct DiscriminatorSpec {
    pub global_widths: Vec<usize>,
    pub local_widths: Vec<usize>,
    pub fc_width: usize,
    pub tile_px: usize,
    pub crop_px: usize,
}

const DISC_KERNEL: usize = 5;
const DISC_GEOMETRY: ConvGeometry = ConvGeometry::new(2, 1, 2);

impl DiscriminatorSpec {
    pub fn new(scale: f64, tile_px: usize, crop_px: usize) -> Result<Self> {
        let widths = [32, 64, 128, 256, 512].map(|b| scaled(b, scale));
        let widths: Vec<usize> = widths.into_iter().collect::<Result<_>>()?;
        let spec = Self {
            local_widths: widths[..4].to_vec(),
            global_widths: widths,
            fc_width: scaled(1024, scale)?,
            tile_px,
            crop_px,
        };
        if !tile_px.is_multiple_of(1 << spec.global_widths.len()) || !crop_px.is_multiple_of(1 << spec.local_widths.len()) {
            return Err(Error::Config(format!(
                "discriminator needs tile_px divisible by 32 and crop_px by 16 (got {tile_px}, {crop_px})"
            )));
        }
        Ok(spec)
    }

    /// Flattened feature length of a branch's last conv layer.
    pub fn branch_features(widths: &[usize], side: usize) -> usize {
        let s = side >> widths.len();
        widths.last().copied().unwrap_or(0) * s * s
    }
}

/// Architecture knobs; everything that changes parameter shapes or the forward pass.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NetworkConfig {
    pub scale: f64,
    pub tile_px: usize,
    pub crop_px: usize,
    pub generator_batch_norm: bool,
    pub discriminator_batch_norm: bool,
    pub seed: u64,
}

impl NetworkConfig {
    pub fn from_pipeline(cfg: &PipelineConfig) -> Self {
        Self {
            scale: cfg.network_scale,
            tile_px: cfg.tile_px,
            crop_px: cfg.crop_px,
            generator_batch_norm: cfg.generator_batch_norm,
            discriminator_batch_norm: cfg.discriminator_batch_norm,
            seed: cfg.seed,
        }
    }
}

/// Learnable tensors and batch-norm running statistics, keyed by layer id.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ModelParams {
    pub tensors: BTreeMap<String, Tensor>,
    pub buffers: BTreeMap<String, Tensor>,
}

/// Tape handles of the parameters bound for one pass.
#[derive(Clone, Debug, Default)]
pub struct Bound {
    pub vars: BTreeMap<String, Var>,
}

impl Bound {
    fn get(&self, name: &str) -> Result<Var> {
        self.vars.get(name).copied().ok_or_else(|| Error::CheckpointMismatch(format!("unbound parameter {name}")))
    }
}

impl ModelParams {
    pub fn get(&self, name: &str) -> Result<&Tensor> {
        self.tensors.get(name).ok_or_else(|| Error::CheckpointMismatch(format!("missing parameter {name}")))
    }

    pub fn numel(&self, prefix: &str) -> usize {
        self.tensors.iter().filter(|(k, _)| k.starts_with(prefix)).map(|(_, t)| t.numel()).sum()
    }

    /// Puts every tensor under `prefix` on the tape, as trainable leaves or constants.
    pub fn bind(&self, tape: &mut Tape, prefix: &str, trainable: bool) -> Bound {
        let vars = self
            .tensors
            .iter()
            .filter(|(k, _)| k.starts_with(prefix))
            .map(|(k, t)| {
                let v = if trainable { tape.param(t.clone()) } else { tape.constant(t.clone()) };
                (k.clone(), v)
            })
            .collect();
        Bound { vars }
    }

    fn running_stats(&self, layer: &str) -> Result<ChannelStats> {
        let get = |k: &str| {
            self.buffers
                .get(&format!("{layer}.bn.{k}"))
                .map(|t| t.data().to_vec())
                .ok_or_else(|| Error::CheckpointMismatch(format!("missing running {k} of {layer}")))
        };
        Ok(ChannelStats { mean: get("mean")?, var: get("var")? })
    }

    /// Exponential running averages with momentum [`BN_MOMENTUM`].
    pub fn update_running_stats(&mut self, batch: &[(String, ChannelStats)]) {
        for (layer, stats) in batch {
            for (k, v) in [("mean", &stats.mean), ("var", &stats.var)] {
                if let Some(t) = self.buffers.get_mut(&format!("{layer}.bn.{k}")) {
                    for (r, &b) in t.data_mut().iter_mut().zip(v) {
                        *r = (1.0 - BN_MOMENTUM) * *r + BN_MOMENTUM * b;
                    }
                }
            }
        }
    }
}

/// Whether batch norm uses batch statistics (and reports them) or running ones.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// Output of a forward pass on a tape.
#[derive(Debug)]
pub struct Forward {
    pub output: Var,
    /// Batch statistics per normalized layer (train mode only).
    pub stats: Vec<(String, ChannelStats)>,
}

/// Seeded per-parameter generator so adding a layer does not reshuffle the others.
fn param_rng(seed: u64, name: &str) -> ChaCha8Rng {
    let digest = Sha256::digest(name.as_bytes());
    let salt = u64::from_le_bytes(digest[..8].try_into().unwrap());
    ChaCha8Rng::seed_from_u64(seed ^ salt)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Model {
    pub config: NetworkConfig,
    pub generator: GeneratorSpec,
    pub discriminator: DiscriminatorSpec,
    pub params: ModelParams,
}

fn gen_layer(i: usize) -> String {
    format!("gen.{i:02}")
}

impl Model {
    /// Builds both networks with He-uniform weights, zero biases, unit BN scales.
    pub fn build(config: NetworkConfig) -> Result<Self> {
        if !(config.scale > 0.0 && config.scale <= 1.0) {
            return Err(Error::Config(format!("network scale {} not in (0,1]", config.scale)));
        }
        if config.crop_px > config.tile_px {
            return Err(Error::Config("crop larger than tile".into()));
        }
        let generator = GeneratorSpec::new(config.scale)?;
        generator.shapes(config.tile_px)?;
        let discriminator = DiscriminatorSpec::new(config.scale, config.tile_px, config.crop_px)?;
        let mut model = Self { config, generator, discriminator, params: ModelParams::default() };
        model.init_generator();
        model.init_discriminator();
        Ok(model)
    }

    fn add_weight(&mut self, name: String, shape: Vec<usize>, fan_in: usize) {
        let bound = (6.0 / fan_in as f64).sqrt() as f32;
        let t = Tensor::uniform(shape, bound, &mut param_rng(self.config.seed, &name));
        self.params.tensors.insert(name, t);
    }

    fn add_norm(&mut self, layer: &str, channels: usize) {
        let p = &mut self.params;
        p.tensors.insert(format!("{layer}.bn.gamma"), Tensor::full([channels], 1.0));
        p.tensors.insert(format!("{layer}.bn.beta"), Tensor::zeros([channels]));
        p.buffers.insert(format!("{layer}.bn.mean"), Tensor::zeros([channels]));
        p.buffers.insert(format!("{layer}.bn.var"), Tensor::full([channels], 1.0));
    }

    fn init_generator(&mut self) {
        let mut cin = self.generator.in_channels;
        for (i, l) in self.generator.layers.clone().into_iter().enumerate() {
            let name = gen_layer(i);
            let (k, cout) = (l.kernel, l.out_channels);
            if l.kind == LayerKind::Deconv {
                self.add_weight(format!("{name}.w"), vec![cin, cout, k, k], cin * k * k / (l.stride * l.stride));
            } else {
                self.add_weight(format!("{name}.w"), vec![cout, cin, k, k], cin * k * k);
            }
            if self.config.generator_batch_norm && l.kind != LayerKind::OutputConv {
                self.add_norm(&name, cout);
            } else {
                self.params.tensors.insert(format!("{name}.b"), Tensor::zeros([cout]));
            }
            cin = cout;
        }
    }

    fn init_discriminator(&mut self) {
        let d = self.discriminator.clone();
        for (branch, widths, side) in [("global", &d.global_widths, d.tile_px), ("local", &d.local_widths, d.crop_px)] {
            let mut cin = CHANNELS;
            for (i, &cout) in widths.iter().enumerate() {
                let name = format!("disc.{branch}.{i}");
                self.add_weight(format!("{name}.w"), vec![cout, cin, DISC_KERNEL, DISC_KERNEL], cin * 25);
                if self.config.discriminator_batch_norm {
                    self.add_norm(&name, cout);
                } else {
                    self.params.tensors.insert(format!("{name}.b"), Tensor::zeros([cout]));
                }
                cin = cout;
            }
            let feats = DiscriminatorSpec::branch_features(widths, side);
            self.add_weight(format!("disc.{branch}.fc.w"), vec![feats, d.fc_width], feats);
            self.params.tensors.insert(format!("disc.{branch}.fc.b"), Tensor::zeros([d.fc_width]));
        }
        self.add_weight("disc.head.w".into(), vec![2 * d.fc_width, 1], 2 * d.fc_width);
        self.params.tensors.insert("disc.head.b".into(), Tensor::zeros([1]));
    }

    /// Canonical architecture description; its digest guards checkpoint loading.
    pub fn describe(&self) -> String {
        let mut s = format!(
            "tile={} crop={} gbn={} dbn={} in={}\n",
            self.config.tile_px,
            self.config.crop_px,
            self.config.generator_batch_norm,
            self.config.discriminator_batch_norm,
            self.generator.in_channels
        );
        for l in &self.generator.layers {
            writeln!(s, "{:?} k{} s{} d{} p{} c{}", l.kind, l.kernel, l.stride, l.dilation, l.padding, l.out_channels)
                .unwrap();
        }
        let d = &self.discriminator;
        writeln!(s, "global {:?} local {:?} fc {}", d.global_widths, d.local_widths, d.fc_width).unwrap();
        for (k, t) in &self.params.tensors {
            writeln!(s, "{k} {:?}", t.shape()).unwrap();
        }
        s
    }

    pub fn spec_hash(&self) -> u64 {
        let digest = Sha256::digest(self.describe().as_bytes());
        u64::from_le_bytes(digest[..8].try_into().unwrap())
    }

    fn normalize(
        &self,
        tape: &mut Tape,
        bound: &Bound,
        layer: &str,
        x: Var,
        mode: Mode,
        stats: &mut Vec<(String, ChannelStats)>,
    ) -> Result<Var> {
        let gamma = bound.get(&format!("{layer}.bn.gamma"))?;
        let beta = bound.get(&format!("{layer}.bn.beta"))?;
        Ok(match mode {
            Mode::Train => {
                let (y, s) = tape.batch_norm_train(x, gamma, beta, BN_EPS)?;
                stats.push((layer.to_string(), s));
                y
            }
            Mode::Eval => tape.batch_norm_eval(x, gamma, beta, self.params.running_stats(layer)?, BN_EPS)?,
        })
    }

    /// `[N, 4, H, W]` -> `[N, 3, H, W]` in (0, 1).
    pub fn generator_forward(&self, tape: &mut Tape, bound: &Bound, input: Var, mode: Mode) -> Result<Forward> {
        let shape = tape.value(input).shape().to_vec();
        if shape.len() != 4 || shape[1] != self.generator.in_channels {
            return Err(Error::Geometry(format!("generator input {shape:?}, expected [N, 4, H, W]")));
        }
        let bn = self.config.generator_batch_norm;
        let mut stats = Vec::new();
        let mut x = input;
        for (i, l) in self.generator.layers.iter().enumerate() {
            let name = gen_layer(i);
            let w = bound.get(&format!("{name}.w"))?;
            let last = l.kind == LayerKind::OutputConv;
            let b = if bn && !last { None } else { Some(bound.get(&format!("{name}.b"))?) };
            x = match l.kind {
                LayerKind::Deconv => tape.conv2d_transpose(x, w, b, l.geometry())?,
                _ => tape.conv2d(x, w, b, l.geometry())?,
            };
            if last {
                x = tape.sigmoid(x);
            } else {
                if bn {
                    x = self.normalize(tape, bound, &name, x, mode, &mut stats)?;
                }
                x = tape.relu(x);
            }
        }
        Ok(Forward { output: x, stats })
    }

    #[allow(clippy::too_many_arguments)]
    fn branch(
        &self,
        tape: &mut Tape,
        bound: &Bound,
        name: &str,
        widths: &[usize],
        mut x: Var,
        mode: Mode,
        stats: &mut Vec<(String, ChannelStats)>,
    ) -> Result<Var> {
        for i in 0..widths.len() {
            let layer = format!("disc.{name}.{i}");
            let w = bound.get(&format!("{layer}.w"))?;
            if self.config.discriminator_batch_norm {
                x = tape.conv2d(x, w, None, DISC_GEOMETRY)?;
                x = self.normalize(tape, bound, &layer, x, mode, stats)?;
            } else {
                let b = bound.get(&format!("{layer}.b"))?;
                x = tape.conv2d(x, w, Some(b), DISC_GEOMETRY)?;
            }
            x = tape.relu(x);
        }
        let n = tape.value(x).shape()[0];
        let feats = tape.value(x).numel() / n;
        x = tape.reshape(x, [n, feats])?;
        let fc = tape.linear(x, bound.get(&format!("disc.{name}.fc.w"))?, Some(bound.get(&format!("disc.{name}.fc.b"))?))?;
        Ok(tape.relu(fc))
    }

    /// Probability that each tile in `[N, 3, H, W]` is real; the local branch
    /// sees the `crop_px` window at each sample's offset. Returns `[N, 1]`.
    pub fn discriminator_forward(
        &self,
        tape: &mut Tape,
        bound: &Bound,
        images: Var,
        offsets: &[(usize, usize)],
        mode: Mode,
    ) -> Result<Forward> {
        let shape = tape.value(images).shape().to_vec();
        let t = self.config.tile_px;
        if shape.len() != 4 || shape[1..] != [CHANNELS, t, t] {
            return Err(Error::Geometry(format!("discriminator input {shape:?}, expected [N, 3, {t}, {t}]")));
        }
        let d = &self.discriminator;
        let mut stats = Vec::new();
        let global = self.branch(tape, bound, "global", &d.global_widths, images, mode, &mut stats)?;
        let crop = tape.crop(images, offsets, d.crop_px, d.crop_px)?;
        let local = self.branch(tape, bound, "local", &d.local_widths, crop, mode, &mut stats)?;
        let fused = tape.concat(&[global, local])?;
        let logit = tape.linear(fused, bound.get("disc.head.w")?, Some(bound.get("disc.head.b")?))?;
        Ok(Forward { output: tape.sigmoid(logit), stats })
    }

    /// Inference-only generator pass with running statistics.
    pub fn generate(&self, input: &Tensor) -> Result<Tensor> {
        let mut tape = Tape::new();
        let bound = self.params.bind(&mut tape, "gen.", false);
        let x = tape.constant(input.clone());
        let f = self.generator_forward(&mut tape, &bound, x, Mode::Eval)?;
        Ok(tape.value(f.output).clone())
    }

    /// Inference-only discriminator probabilities.
    pub fn discriminate(&self, images: &Tensor, offsets: &[(usize, usize)]) -> Result<Vec<f32>> {
        let mut tape = Tape::new();
        let bound = self.params.bind(&mut tape, "disc.", false);
        let x = tape.constant(images.clone());
        let f = self.discriminator_forward(&mut tape, &bound, x, offsets, Mode::Eval)?;
        Ok(tape.value(f.output).data().to_vec())
    }

    /// Top-left corner of the local crop for a hole.
    pub fn crop_offset(&self, hole: Option<HoleRect>) -> (usize, usize) {
        local_crop_offset(hole, self.config.tile_px, self.config.crop_px)
    }
}

/// Top-left corner of the `crop_px` window centered on the hole center,
/// clamped into the tile. Without a hole the window is centered on the tile.
pub fn local_crop_offset(hole: Option<HoleRect>, tile_px: usize, crop_px: usize) -> (usize, usize) {
    let (cr, cc) = hole.map_or((tile_px / 2, tile_px / 2), |h| h.center());
    let place = |c: usize| c.saturating_sub(crop_px / 2).min(tile_px - crop_px);
    (place(cr), place(cc))
}

/// Crop of a tile around its hole, as in the local discriminator.
pub fn local_crop(tile: &Tile, mask: &Mask, crop_px: usize) -> Result<Tile> {
    mask.check_tile(tile)?;
    let side = tile.side().ok_or_else(|| Error::Geometry("local crop needs a square tile".into()))?;
    if crop_px > side {
        return Err(Error::Geometry(format!("crop {crop_px} larger than tile {side}")));
    }
    let (r, c) = local_crop_offset(mask.hole, side, crop_px);
    tile.crop(r, c, crop_px, crop_px)
}

/// `[N, 4, H, W]` generator input: masked tiles in [0, 1] followed by the mask plane.
pub fn assemble_input(tiles: &[&Tile], masks: &[Mask], fill: u8) -> Result<Tensor> {
    let Some(first) = tiles.first() else {
        return Err(Error::Geometry("empty batch".into()));
    };
    if tiles.len() != masks.len() {
        return Err(Error::Geometry(format!("{} tiles with {} masks", tiles.len(), masks.len())));
    }
    let (h, w) = (first.height(), first.width());
    let mut data = Vec::with_capacity(tiles.len() * INPUT_CHANNELS * h * w);
    for (tile, mask) in tiles.iter().zip(masks) {
        let masked = apply_mask(tile, mask, fill)?;
        data.extend(masked.data().iter().map(|&v| normalize(v)));
        data.extend(mask.plane());
    }
    Ok(Tensor::new([tiles.len(), INPUT_CHANNELS, h, w], data)?)
}

/// `[N, 3, H, W]` targets in [0, 1].
pub fn assemble_targets(tiles: &[&Tile]) -> Result<Tensor> {
    let Some(first) = tiles.first() else {
        return Err(Error::Geometry("empty batch".into()));
    };
    let (h, w) = (first.height(), first.width());
    let mut data = Vec::with_capacity(tiles.len() * CHANNELS * h * w);
    for t in tiles {
        if (t.height(), t.width()) != (h, w) {
            return Err(Error::Geometry("tiles in a batch differ in size".into()));
        }
        data.extend(t.data().iter().map(|&v| normalize(v)));
    }
    Ok(Tensor::new([tiles.len(), CHANNELS, h, w], data)?)
}

/// `[N, 3, H, W]` indicator of hole pixels (the complement of the mask), repeated per channel.
pub fn hole_planes(masks: &[Mask]) -> Result<Tensor> {
    let Some(first) = masks.first() else {
        return Err(Error::Geometry("empty batch".into()));
    };
    let (h, w) = (first.height, first.width);
    let mut data = Vec::with_capacity(masks.len() * CHANNELS * h * w);
    for m in masks {
        let plane: Vec<f32> = m.values().into_iter().map(|v| f32::from(1 - v)).collect();
        for _ in 0..CHANNELS {
            data.extend_from_slice(&plane);
        }
    }
    Ok(Tensor::new([masks.len(), CHANNELS, h, w], data)?)
}

/// Context pixels from `original`, hole pixels from `raw`.
pub fn restore_context(raw: &Tile, original: &Tile, mask: &Mask) -> Result<Tile> {
    mask.check_tile(original)?;
    mask.check_tile(raw)?;
    let mut out = original.clone();
    if let Some(h) = mask.hole {
        for c in 0..CHANNELS {
            for r in h.row0..h.row_end() {
                for q in h.col0..h.col_end() {
                    out.set(c, r, q, raw.get(c, r, q));
                }
            }
        }
    }
    Ok(out)
}
