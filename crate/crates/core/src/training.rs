//! Hole-restricted reconstruction loss, adversarial losses and the three-phase schedule.
//!
//! Phase 1 trains the generator on reconstruction alone, phase 2 trains the
//! discriminator against a frozen generator, and phase 3 alternates one
//! discriminator step and one generator step on the combined objective.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use deepstreet_tensor::tape::BCE_CLAMP;
use deepstreet_tensor::{AdadeltaConfig, AdadeltaState, Gradients, Tape, Tensor, Var};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::checkpoint::{self, Counters};
use crate::config::PipelineConfig;
use crate::error::{Error, Result};
use crate::mask::{Mask, MaskGeometry};
use crate::network::{assemble_input, assemble_targets, hole_planes, Bound, Mode, Model};
use crate::raster::{Manifest, Split};
use crate::tile::{Tile, CHANNELS};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AdversarialForm {
    /// `-log D(G(x))`.
    NonSaturating,
    /// `log(1 - D(G(x)))`.
    Saturating,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Objective {
    /// Reconstruction plus `alpha` times the adversarial term.
    Combined,
    /// Reconstruction only; the discriminator is never consulted.
    PureMse,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub alpha: f64,
    pub batch_size: usize,
    pub generator_iters: usize,
    pub discriminator_iters: usize,
    pub joint_iters: usize,
    pub adadelta: AdadeltaConfig,
    pub seed: u64,
    /// 0 checkpoints only at phase boundaries.
    pub checkpoint_every: usize,
    pub mask: MaskGeometry,
    pub hole_fill: u8,
    pub adversarial: AdversarialForm,
    pub objective: Objective,
}

impl TrainConfig {
    pub fn from_pipeline(cfg: &PipelineConfig) -> Self {
        Self {
            alpha: cfg.alpha,
            batch_size: cfg.batch_size,
            generator_iters: cfg.generator_iters,
            discriminator_iters: cfg.discriminator_iters,
            joint_iters: cfg.joint_iters,
            adadelta: cfg.adadelta(),
            seed: cfg.seed,
            checkpoint_every: cfg.checkpoint_every,
            mask: cfg.mask_geometry(),
            hole_fill: cfg.hole_fill,
            adversarial: AdversarialForm::NonSaturating,
            objective: Objective::Combined,
        }
    }

    /// 256-pixel tiles, batch 24, 900k/30k/900k iterations.
    pub fn paper() -> Self {
        Self::from_pipeline(&PipelineConfig::default())
    }

    /// 64-pixel tiles, batch 8, 2000/500/2000 iterations.
    pub fn desk() -> Self {
        Self::from_pipeline(&PipelineConfig::desk())
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err(Error::Config(format!("alpha {} must be non-negative", self.alpha)));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be positive".into()));
        }
        self.mask.validate()?;
        self.adadelta.validate()?;
        Ok(())
    }
}

/// Epochs covered by `iterations` batches over `dataset` tiles.
pub fn epochs(iterations: usize, batch_size: usize, dataset: usize) -> f64 {
    (iterations * batch_size) as f64 / dataset as f64
}

/// Mean over the batch of `sum((1 - M) * (output - target)^2)` over channels and pixels.
pub fn mse_loss(target: &Tensor, output: &Tensor, masks: &[Mask]) -> Result<f32> {
    let mut tape = Tape::new();
    let (t, o) = (tape.constant(target.clone()), tape.constant(output.clone()));
    let loss = hole_mse_on_tape(&mut tape, t, o, masks)?;
    Ok(tape.value(loss).item())
}

fn hole_mse_on_tape(tape: &mut Tape, target: Var, output: Var, masks: &[Mask]) -> Result<Var> {
    let holes = tape.constant(hole_planes(masks)?);
    let diff = tape.sub(output, target)?;
    let masked = tape.mul(diff, holes)?;
    let sq = tape.square(masked);
    let total = tape.sum(sq);
    Ok(tape.scale(total, 1.0 / masks.len() as f32))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GanLosses {
    /// `-[log d_real + log(1 - d_fake)]`.
    pub discriminator: f64,
    pub generator: f64,
    /// An input fell outside `[BCE_CLAMP, 1 - BCE_CLAMP]`.
    pub clamped: bool,
}

fn clamp_prob(p: f64) -> (f64, bool) {
    let lo = BCE_CLAMP as f64;
    let q = p.clamp(lo, 1.0 - lo);
    (q, q != p)
}

pub fn gan_losses(d_real: f64, d_fake: f64, form: AdversarialForm) -> GanLosses {
    let (r, cr) = clamp_prob(d_real);
    let (f, cf) = clamp_prob(d_fake);
    let generator = match form {
        AdversarialForm::NonSaturating => -f.ln(),
        AdversarialForm::Saturating => (1.0 - f).ln(),
    };
    GanLosses { discriminator: -(r.ln() + (1.0 - f).ln()), generator, clamped: cr || cf }
}

/// `(generator total, discriminator total) = (mse + alpha * adv, alpha * d_loss)`.
pub fn combined_objective(mse: f64, adv: f64, d_loss: f64, alpha: f64) -> (f64, f64) {
    (mse + alpha * adv, alpha * d_loss)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Phase {
    Generator = 1,
    Discriminator = 2,
    Joint = 3,
}

impl Phase {
    fn name(self) -> &'static str {
        match self {
            Phase::Generator => "phase1",
            Phase::Discriminator => "phase2",
            Phase::Joint => "phase3",
        }
    }

    fn stream_tag(self) -> u64 {
        0x9e37_79b9_7f4a_7c15u64.wrapping_mul(self as u64)
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", *self as u8)
    }
}

/// One iteration's record. Losses a phase does not compute are logged as 0.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LogRecord {
    pub phase: Phase,
    pub iteration: usize,
    pub mse: f32,
    /// `mse` divided by the hole pixel-channel count of one sample.
    pub mse_per_px: f32,
    pub d_loss: f32,
    pub g_adv: f32,
    pub clamped: bool,
    pub millis: u64,
}

pub const LOG_HEADER: &str = "phase\titer\tmse\tmse_per_px\td_loss\tg_adv\tclamped\tmillis";

impl LogRecord {
    pub fn to_tsv(&self) -> String {
        format!(
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            self.phase,
            self.iteration,
            self.mse,
            self.mse_per_px,
            self.d_loss,
            self.g_adv,
            u8::from(self.clamped),
            self.millis
        )
    }

    fn all_finite(&self) -> bool {
        [self.mse, self.mse_per_px, self.d_loss, self.g_adv].iter().all(|v| v.is_finite())
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainingRunLog {
    pub records: Vec<LogRecord>,
    pub checkpoints: Vec<PathBuf>,
}

impl TrainingRunLog {
    pub fn phase(&self, phase: Phase) -> impl Iterator<Item = &LogRecord> {
        self.records.iter().filter(move |r| r.phase == phase)
    }

    pub fn to_tsv(&self) -> String {
        let mut s = format!("{LOG_HEADER}\n");
        for r in &self.records {
            s.push_str(&r.to_tsv());
            s.push('\n');
        }
        s
    }
}

struct Batch {
    targets: Tensor,
    input: Tensor,
    masks: Vec<Mask>,
    offsets: Vec<(usize, usize)>,
}

/// Optimizer state per named tensor.
#[derive(Clone, Debug, Default)]
struct Optimizer {
    states: BTreeMap<String, AdadeltaState>,
}

impl Optimizer {
    fn new(model: &Model, prefix: &str, cfg: AdadeltaConfig) -> Result<Self> {
        let mut states = BTreeMap::new();
        for (k, t) in model.params.tensors.iter().filter(|(k, _)| k.starts_with(prefix)) {
            states.insert(k.clone(), AdadeltaState::new(t.numel(), cfg)?);
        }
        Ok(Self { states })
    }

    /// Applies every gradient; all-or-nothing if any gradient is non-finite.
    fn step(&mut self, model: &mut Model, bound: &Bound, grads: &Gradients) -> Result<()> {
        let mut updates = Vec::with_capacity(self.states.len());
        for name in self.states.keys() {
            let var = bound.vars[name];
            let len = model.params.tensors[name].numel();
            let g = grads.get_or_zero(var, len);
            if g.iter().any(|v| !v.is_finite()) {
                return Err(deepstreet_tensor::TensorError::NonFinite("gradient").into());
            }
            updates.push((name.clone(), g));
        }
        for (name, g) in updates {
            let param = model.params.tensors.get_mut(&name).expect("bound parameter");
            self.states.get_mut(&name).expect("state").step(param.data_mut(), &g)?;
        }
        Ok(())
    }
}

/// Drives training over an in-memory set of tiles.
pub struct Trainer {
    pub model: Model,
    pub config: TrainConfig,
    tiles: Vec<Tile>,
    gen_opt: Optimizer,
    disc_opt: Optimizer,
    pub counters: Counters,
    pub log: TrainingRunLog,
    checkpoint_dir: Option<PathBuf>,
    log_file: Option<std::fs::File>,
}

impl Trainer {
    pub fn new(model: Model, config: TrainConfig, tiles: Vec<Tile>) -> Result<Self> {
        config.validate()?;
        if tiles.len() < config.batch_size {
            return Err(Error::Config(format!(
                "{} training tiles for a batch of {}",
                tiles.len(),
                config.batch_size
            )));
        }
        let side = model.config.tile_px;
        if tiles.iter().any(|t| t.side() != Some(side)) || config.mask.tile_px != side {
            return Err(Error::Geometry(format!("training tiles and masks must be {side}x{side}")));
        }
        let gen_opt = Optimizer::new(&model, "gen.", config.adadelta)?;
        let disc_opt = Optimizer::new(&model, "disc.", config.adadelta)?;
        Ok(Self {
            model,
            config,
            tiles,
            gen_opt,
            disc_opt,
            counters: Counters::default(),
            log: TrainingRunLog::default(),
            checkpoint_dir: None,
            log_file: None,
        })
    }

    /// Writes checkpoints into `dir` at phase boundaries and at the configured cadence.
    pub fn with_checkpoints(mut self, dir: &Path) -> Result<Self> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        self.checkpoint_dir = Some(dir.to_path_buf());
        Ok(self)
    }

    /// Appends every log record to a TSV file.
    pub fn with_log_file(mut self, path: &Path) -> Result<Self> {
        let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        writeln!(f, "{LOG_HEADER}").map_err(|e| Error::io(path, e))?;
        self.log_file = Some(f);
        Ok(self)
    }

    fn step_rng(&self, phase: Phase, step: usize) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.config.seed ^ phase.stream_tag());
        rng.set_stream(step as u64);
        rng
    }

    fn sample_batch(&self, phase: Phase, step: usize) -> Result<Batch> {
        let mut rng = self.step_rng(phase, step);
        let mut picked = Vec::with_capacity(self.config.batch_size);
        let mut masks = Vec::with_capacity(self.config.batch_size);
        for _ in 0..self.config.batch_size {
            picked.push(&self.tiles[rng.random_range(0..self.tiles.len())]);
            masks.push(self.config.mask.random(&mut rng));
        }
        let offsets = masks.iter().map(|m| self.model.crop_offset(m.hole)).collect();
        Ok(Batch {
            targets: assemble_targets(&picked)?,
            input: assemble_input(&picked, &masks, self.config.hole_fill)?,
            masks,
            offsets,
        })
    }

    fn per_px(&self, mse: f32) -> f32 {
        mse / (self.config.mask.hole_px * self.config.mask.hole_px * CHANNELS) as f32
    }

    fn diverged(&self, what: &'static str, phase: Phase, iteration: usize) -> Error {
        Error::Diverged { what, phase: phase.name(), iteration, last_checkpoint: self.log.checkpoints.last().cloned() }
    }

    fn guard<T>(&self, r: Result<T>, phase: Phase, iteration: usize) -> Result<T> {
        r.map_err(|e| match e {
            Error::Tensor(deepstreet_tensor::TensorError::NonFinite(_)) => self.diverged("gradient", phase, iteration),
            other => other,
        })
    }

    /// One discriminator update on real tiles versus fakes, with loss `weight * d_loss`.
    /// Both inputs are `[N, 3, H, W]` constants; returns `(d_loss, clamped)`.
    pub fn discriminator_update(
        &mut self,
        real: &Tensor,
        fake: &Tensor,
        offsets: &[(usize, usize)],
        weight: f32,
    ) -> Result<(f32, bool)> {
        let [n, c, h, w] = real.dims4("real batch")?;
        if fake.shape() != real.shape() || offsets.len() != n {
            return Err(Error::Geometry("real and fake batches differ".into()));
        }
        let mut data = real.data().to_vec();
        data.extend_from_slice(fake.data());
        let both = Tensor::new([2 * n, c, h, w], data)?;
        let mut offs = offsets.to_vec();
        offs.extend_from_slice(offsets);
        let targets: Vec<f32> = (0..2 * n).map(|i| if i < n { 1.0 } else { 0.0 }).collect();

        let mut tape = Tape::new();
        let bound = self.model.params.bind(&mut tape, "disc.", true);
        let x = tape.constant(both);
        let fwd = self.model.discriminator_forward(&mut tape, &bound, x, &offs, Mode::Train)?;
        let probs = tape.value(fwd.output).data();
        let clamped = probs.iter().any(|&p| !(BCE_CLAMP..=1.0 - BCE_CLAMP).contains(&p));
        let bce = tape.bce(fwd.output, &targets)?;
        // Mean BCE over 2N samples is half of -[log d_real + log(1 - d_fake)].
        let d_loss = 2.0 * tape.value(bce).item();
        let loss = tape.scale(bce, 2.0 * weight);
        if !d_loss.is_finite() {
            return Err(deepstreet_tensor::TensorError::NonFinite("discriminator loss").into());
        }
        let grads = tape.backward(loss)?;
        self.disc_opt.step(&mut self.model, &bound, &grads)?;
        self.model.params.update_running_stats(&fwd.stats);
        self.counters.disc_steps += 1;
        Ok((d_loss, clamped))
    }

    fn record(&mut self, rec: LogRecord) -> Result<()> {
        if !rec.all_finite() {
            return Err(self.diverged("loss", rec.phase, rec.iteration));
        }
        if let Some(f) = self.log_file.as_mut() {
            writeln!(f, "{}", rec.to_tsv()).map_err(|e| Error::io("training log", e))?;
        }
        self.log.records.push(rec);
        self.counters.iterations += 1;
        Ok(())
    }

    /// Phase-1 iteration: reconstruction loss only.
    pub fn generator_step(&mut self, iteration: usize) -> Result<LogRecord> {
        let start = Instant::now();
        let phase = Phase::Generator;
        let batch = self.sample_batch(phase, iteration)?;
        let mut tape = Tape::new();
        let bound = self.model.params.bind(&mut tape, "gen.", true);
        let input = tape.constant(batch.input);
        let fwd = self.model.generator_forward(&mut tape, &bound, input, Mode::Train)?;
        let target = tape.constant(batch.targets);
        let loss = hole_mse_on_tape(&mut tape, target, fwd.output, &batch.masks)?;
        let mse = tape.value(loss).item();
        if !mse.is_finite() {
            return Err(self.diverged("loss", phase, iteration));
        }
        let grads = tape.backward(loss)?;
        let stepped = self.gen_opt.step(&mut self.model, &bound, &grads);
        self.guard(stepped, phase, iteration)?;
        self.model.params.update_running_stats(&fwd.stats);
        self.counters.gen_steps += 1;
        let rec = LogRecord {
            phase,
            iteration,
            mse,
            mse_per_px: self.per_px(mse),
            d_loss: 0.0,
            g_adv: 0.0,
            clamped: false,
            millis: start.elapsed().as_millis() as u64,
        };
        self.record(rec)?;
        Ok(rec)
    }

    /// Completed tiles: generator output in the hole, targets elsewhere.
    fn composite(output: &Tensor, targets: &Tensor, masks: &[Mask]) -> Result<Tensor> {
        let holes = hole_planes(masks)?;
        let data = output
            .data()
            .iter()
            .zip(targets.data())
            .zip(holes.data())
            .map(|((&o, &t), &h)| if h == 1.0 { o } else { t })
            .collect();
        Ok(Tensor::new(targets.shape().to_vec(), data)?)
    }

    /// Phase-2 iteration: discriminator against frozen-generator completions.
    pub fn discriminator_step(&mut self, iteration: usize) -> Result<LogRecord> {
        let start = Instant::now();
        let phase = Phase::Discriminator;
        let batch = self.sample_batch(phase, iteration)?;
        let raw = self.model.generate(&batch.input)?;
        let fake = Self::composite(&raw, &batch.targets, &batch.masks)?;
        let mse = mse_loss(&batch.targets, &raw, &batch.masks)?;
        let step = self.discriminator_update(&batch.targets, &fake, &batch.offsets, 1.0);
        let (d_loss, clamped) = self.guard(step, phase, iteration)?;
        let rec = LogRecord {
            phase,
            iteration,
            mse,
            mse_per_px: self.per_px(mse),
            d_loss,
            g_adv: 0.0,
            clamped,
            millis: start.elapsed().as_millis() as u64,
        };
        self.record(rec)?;
        Ok(rec)
    }

    /// Phase-3 iteration: one discriminator step on `alpha * d_loss`, then one
    /// generator step on `mse + alpha * adv` against the updated discriminator.
    pub fn joint_step(&mut self, iteration: usize) -> Result<LogRecord> {
        let start = Instant::now();
        let phase = Phase::Joint;
        let alpha = self.config.alpha as f32;
        let combined = self.config.objective == Objective::Combined;
        let batch = self.sample_batch(phase, iteration)?;

        let mut tape = Tape::new();
        let gen = self.model.params.bind(&mut tape, "gen.", true);
        let input = tape.constant(batch.input);
        let fwd = self.model.generator_forward(&mut tape, &gen, input, Mode::Train)?;
        let target = tape.constant(batch.targets.clone());
        let mse_var = hole_mse_on_tape(&mut tape, target, fwd.output, &batch.masks)?;
        let mse = tape.value(mse_var).item();

        let (mut d_loss, mut g_adv, mut clamped) = (0.0, 0.0, false);
        let total = if combined {
            let fake = Self::composite(tape.value(fwd.output), &batch.targets, &batch.masks)?;
            let step = self.discriminator_update(&batch.targets, &fake, &batch.offsets, alpha);
            (d_loss, clamped) = self.guard(step, phase, iteration)?;

            let disc = self.model.params.bind(&mut tape, "disc.", false);
            let holes = tape.constant(hole_planes(&batch.masks)?);
            let context = Self::composite(&Tensor::zeros(batch.targets.shape().to_vec()), &batch.targets, &batch.masks)?;
            let context = tape.constant(context);
            let inside = tape.mul(fwd.output, holes)?;
            let fake = tape.add(inside, context)?;
            let d = self.model.discriminator_forward(&mut tape, &disc, fake, &batch.offsets, Mode::Train)?;
            let probs = tape.value(d.output).data();
            clamped |= probs.iter().any(|&p| !(BCE_CLAMP..=1.0 - BCE_CLAMP).contains(&p));
            let n = probs.len();
            let adv = match self.config.adversarial {
                AdversarialForm::NonSaturating => tape.bce(d.output, &vec![1.0; n])?,
                AdversarialForm::Saturating => {
                    let b = tape.bce(d.output, &vec![0.0; n])?;
                    tape.scale(b, -1.0)
                }
            };
            g_adv = tape.value(adv).item();
            let weighted = tape.scale(adv, alpha);
            tape.add(mse_var, weighted)?
        } else {
            mse_var
        };
        if !(mse.is_finite() && g_adv.is_finite()) {
            return Err(self.diverged("loss", phase, iteration));
        }
        let grads = tape.backward(total)?;
        let stepped = self.gen_opt.step(&mut self.model, &gen, &grads);
        self.guard(stepped, phase, iteration)?;
        self.model.params.update_running_stats(&fwd.stats);
        self.counters.gen_steps += 1;
        let rec = LogRecord {
            phase,
            iteration,
            mse,
            mse_per_px: self.per_px(mse),
            d_loss,
            g_adv,
            clamped,
            millis: start.elapsed().as_millis() as u64,
        };
        self.record(rec)?;
        Ok(rec)
    }

    fn save_checkpoint(&mut self, phase: Phase, iteration: usize) -> Result<()> {
        let Some(dir) = &self.checkpoint_dir else {
            return Ok(());
        };
        let path = dir.join(format!("{}_{iteration:07}.ckpt", phase.name()));
        self.counters.phase = phase as u32;
        checkpoint::save(&path, &self.model, self.counters)?;
        log::info!("checkpoint {}", path.display());
        self.log.checkpoints.push(path);
        Ok(())
    }

    /// Runs `iterations` steps of `phase`, checkpointing at the cadence and at the end.
    pub fn run_phase(&mut self, phase: Phase, iterations: usize) -> Result<()> {
        for i in 0..iterations {
            let rec = match phase {
                Phase::Generator => self.generator_step(i)?,
                Phase::Discriminator => self.discriminator_step(i)?,
                Phase::Joint => self.joint_step(i)?,
            };
            if i % 100 == 0 {
                log::debug!("{} {i}: mse {:.4} d {:.4} adv {:.4}", phase.name(), rec.mse, rec.d_loss, rec.g_adv);
            }
            let done = i + 1;
            let every = self.config.checkpoint_every;
            if every > 0 && done % every == 0 && done < iterations {
                self.save_checkpoint(phase, done)?;
            }
        }
        self.save_checkpoint(phase, iterations)
    }

    /// The full schedule. With [`Objective::PureMse`] phase 2 is skipped.
    pub fn run(&mut self) -> Result<&TrainingRunLog> {
        self.run_phase(Phase::Generator, self.config.generator_iters)?;
        if self.config.objective == Objective::Combined {
            self.run_phase(Phase::Discriminator, self.config.discriminator_iters)?;
        }
        self.run_phase(Phase::Joint, self.config.joint_iters)?;
        Ok(&self.log)
    }
}

/// Loads the train split of a manifest as tiles.
pub fn load_training_tiles(manifest_path: &Path) -> Result<Vec<Tile>> {
    let manifest = Manifest::load(manifest_path)?;
    let dir = manifest_path.parent().unwrap_or(Path::new("."));
    manifest.split(Split::Train).map(|r| Tile::load_png(&r.resolve(dir))).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mse_counts_hole_pixels_only() {
        let mask = Mask::rect(4, 4, crate::mask::HoleRect { row0: 1, col0: 1, height: 2, width: 2 }).unwrap();
        let target = Tensor::zeros([1, 3, 4, 4]);
        let mut out = Tensor::zeros([1, 3, 4, 4]);
        assert_eq!(mse_loss(&target, &out, &[mask]).unwrap(), 0.0);
        out.data_mut()[16 + 5] = 0.5;
        assert_eq!(mse_loss(&target, &out, &[mask]).unwrap(), 0.25);
        out.data_mut()[0] = 1.0;
        assert_eq!(mse_loss(&target, &out, &[mask]).unwrap(), 0.25);
    }

    #[test]
    fn gan_loss_values() {
        let l = gan_losses(0.5, 0.5, AdversarialForm::NonSaturating);
        assert!((l.discriminator - 2.0 * std::f64::consts::LN_2).abs() < 1e-5);
        assert!((l.generator - std::f64::consts::LN_2).abs() < 1e-5);
        assert!(!l.clamped);
        assert!(gan_losses(1.0 - 1e-12, 1e-12, AdversarialForm::NonSaturating).discriminator < 1e-6);
        assert!(gan_losses(1.0, 0.0, AdversarialForm::NonSaturating).clamped);
        let s = gan_losses(0.5, 0.5, AdversarialForm::Saturating);
        assert!((s.generator + std::f64::consts::LN_2).abs() < 1e-5);
    }

    #[test]
    fn combined_objective_values() {
        const LN2: f64 = std::f64::consts::LN_2;
        let (g, d) = combined_objective(2.0, LN2, 1.3863, 0.001);
        assert!((g - 2.000_693).abs() < 1e-6);
        assert!((d - 0.001_386_3).abs() < 1e-9);
        assert_eq!(combined_objective(2.0, LN2, 1.0, 0.0).0, 2.0);
        let (g2, _) = combined_objective(2.0, LN2, 1.0, 0.002);
        assert!(((g2 - 2.0) - 2.0 * (g - 2.0)).abs() < 1e-12);
    }

    #[test]
    fn reference_schedule() {
        let p = TrainConfig::paper();
        assert_eq!((p.generator_iters, p.discriminator_iters, p.joint_iters, p.batch_size), (900_000, 30_000, 900_000, 24));
        assert_eq!(p.alpha, 0.001);
        assert_eq!(epochs(900_000, 24, 720_000), 30.0);
        assert_eq!(epochs(30_000, 24, 720_000), 1.0);
        let d = TrainConfig::desk();
        assert_eq!((d.generator_iters, d.discriminator_iters, d.joint_iters, d.batch_size), (2_000, 500, 2_000, 8));
    }
}
