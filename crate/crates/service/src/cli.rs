//! The `deepstreet` command line.
//!
//! Exit status: 0 on success, 1 on a runtime failure (missing or unreadable
//! inputs included), 2 on a usage error such as an unknown subcommand.

use std::ffi::OsString;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use deepstreet::checkpoint;
use deepstreet::completion::{complete_request, write_completion, CompletionRequest};
use deepstreet::evaluation::{evaluate_tile, EvalReport};
use deepstreet::network::{Model, NetworkConfig};
use deepstreet::raster::{
    encode_dem, parse_road_lines, sample_tiles, split_dataset, stroke_roads, CityRaster, DemGrid, Manifest,
    ManifestHeader, ManifestRecord, OverlapPolicy, RasterGeometry, Split,
};
use deepstreet::training::{load_training_tiles, TrainConfig, Trainer};
use deepstreet::{apply_mask, random_mask, HoleRect, Mask, PipelineConfig, Tile};

use crate::api::{self, AppState};

#[derive(Debug, Parser)]
#[command(name = "deepstreet", version, about = "Street-network completion over road/terrain tiles")]
pub struct Cli {
    /// TOML pipeline configuration; built-in defaults when absent.
    #[arg(long, global = true, env = "DEEPSTREET_CONFIG")]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Rasterize road vectors over a DEM into a city raster PNG.
    Ingest(IngestArgs),
    /// Cut tiles from a city raster and write a manifest.
    Sample(SampleArgs),
    /// Run the three-phase training schedule.
    Train(TrainArgs),
    /// Complete one tile, or every test tile of a manifest.
    Complete(CompleteArgs),
    /// Write diagnostics and montages for test tiles.
    Eval(EvalArgs),
    /// Serve the HTTP API.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    /// Line-delimited LINESTRING road file.
    #[arg(long)]
    pub roads: PathBuf,
    /// ESRI ASCII grid DEM.
    #[arg(long)]
    pub dem: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    #[arg(long)]
    pub raster: PathBuf,
    #[arg(long)]
    pub count: usize,
    #[arg(long, default_value = "disjoint")]
    pub policy: OverlapPolicy,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Tile side; the configured tile_px by default.
    #[arg(long)]
    pub tile_px: Option<usize>,
    /// Attach a seeded random hole to every test tile.
    #[arg(long)]
    pub holes: bool,
    /// Output directory for `manifest.tsv` and `tiles/`.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Defaults to `<data_dir>/manifest.tsv`.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Defaults to the configured checkpoint_dir.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct CompleteArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long, conflicts_with = "manifest")]
    pub tile: Option<PathBuf>,
    /// Hole rectangle `row0,col0,height,width`.
    #[arg(long, value_parser = parse_rect, conflicts_with = "mask_png")]
    pub mask: Option<HoleRect>,
    /// Mask PNG, 0 inside the hole and 255 elsewhere.
    #[arg(long)]
    pub mask_png: Option<PathBuf>,
    /// Complete every test tile of this manifest instead of a single tile.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Also write the raw generator output.
    #[arg(long)]
    pub intermediate: bool,
    /// Output PNG for one tile, output directory for a manifest.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long, default_value = "test")]
    pub split: Split,
    #[arg(long)]
    pub limit: Option<usize>,
    #[arg(long)]
    pub no_montages: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    /// Without a checkpoint the service starts degraded.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    #[arg(long, default_value = "127.0.0.1:8080")]
    pub addr: SocketAddr,
}

/// Parses `row0,col0,height,width`.
pub fn parse_rect(s: &str) -> std::result::Result<HoleRect, String> {
    let v: Vec<usize> = s
        .split(',')
        .map(|p| p.trim().parse::<usize>().map_err(|e| format!("`{p}`: {e}")))
        .collect::<std::result::Result<_, _>>()?;
    match v[..] {
        [row0, col0, height, width] => Ok(HoleRect { row0, col0, height, width }),
        _ => Err(format!("expected row0,col0,height,width, got `{s}`")),
    }
}

/// Parses arguments, runs the command and maps the outcome to an exit status.
pub fn main(args: impl IntoIterator<Item = OsString>) -> ExitCode {
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

pub fn run(cli: Cli) -> Result<()> {
    let cfg = match &cli.config {
        Some(path) => PipelineConfig::load(path)?,
        None => PipelineConfig::default(),
    };
    match cli.command {
        Command::Ingest(a) => ingest(&cfg, &a),
        Command::Sample(a) => sample(&cfg, &a),
        Command::Train(a) => train(&cfg, &a),
        Command::Complete(a) => complete_cmd(&cfg, &a),
        Command::Eval(a) => eval(&cfg, &a),
        Command::Serve(a) => serve(&cfg, &a),
    }
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn ingest(cfg: &PipelineConfig, a: &IngestArgs) -> Result<()> {
    let roads = parse_road_lines(&read(&a.roads)?, &cfg.road_classes())?;
    let dem = DemGrid::parse_ascii_grid(&read(&a.dem)?)?;
    let geometry = dem.raster_geometry(cfg.pixel_size_m)?;
    let (mut raster, stats) = stroke_roads(&roads, &geometry);
    raster.set_topo(&encode_dem(&dem, cfg.pixel_size_m, cfg.dem_min_m, cfg.dem_max_m)?)?;
    raster.image.save_png(&a.out)?;
    println!(
        "{}: {}x{} px, {} edges drawn, {} zero-length skipped",
        a.out.display(),
        geometry.width,
        geometry.height,
        stats.edges_drawn,
        stats.edges_skipped
    );
    Ok(())
}

fn sample(cfg: &PipelineConfig, a: &SampleArgs) -> Result<()> {
    let image = Tile::load_png(&a.raster)?;
    let geometry = RasterGeometry {
        origin_x: 0.0,
        origin_y: 0.0,
        pixel_size_m: cfg.pixel_size_m,
        width: image.width(),
        height: image.height(),
    };
    let raster = CityRaster { geometry, image };
    let seed = a.seed.unwrap_or(cfg.seed);
    let tile_px = a.tile_px.unwrap_or(cfg.tile_px);
    let mut tiles = sample_tiles(&raster, a.count, tile_px, seed, a.policy)?;
    if tiles.len() >= 2 {
        split_dataset(&mut tiles, cfg.train_fraction, seed)?;
    }
    let tile_dir = a.out.join("tiles");
    std::fs::create_dir_all(&tile_dir).with_context(|| format!("creating {}", tile_dir.display()))?;
    let geom = deepstreet::MaskGeometry { tile_px, ..cfg.mask_geometry() };
    let mut records = Vec::with_capacity(tiles.len());
    for t in &tiles {
        let id = format!("t{:06}", t.id);
        let path = PathBuf::from("tiles").join(format!("{id}.png"));
        t.tile.save_png(&a.out.join(&path))?;
        let hole = if a.holes && t.split == Split::Test {
            random_mask(&geom, seed.wrapping_add(t.id as u64))?.hole
        } else {
            None
        };
        records.push(ManifestRecord { id, row: t.row, col: t.col, split: t.split, path, hole });
    }
    let manifest = Manifest {
        header: ManifestHeader {
            pixel_size_m: cfg.pixel_size_m,
            tile_px,
            dem_min_m: cfg.dem_min_m,
            dem_max_m: cfg.dem_max_m,
            seed,
        },
        records,
    };
    let path = a.out.join("manifest.tsv");
    manifest.save(&path)?;
    let train = manifest.split(Split::Train).count();
    println!("{}: {} tiles ({train} train, {} test)", path.display(), tiles.len(), tiles.len() - train);
    Ok(())
}

fn train(cfg: &PipelineConfig, a: &TrainArgs) -> Result<()> {
    let mut cfg = cfg.clone();
    if let Some(seed) = a.seed {
        cfg.seed = seed;
    }
    let manifest = a.manifest.clone().unwrap_or_else(|| cfg.data_dir.join("manifest.tsv"));
    let out = a.out.clone().unwrap_or_else(|| cfg.checkpoint_dir.clone());
    let tiles = load_training_tiles(&manifest)?;
    let model = Model::build(NetworkConfig::from_pipeline(&cfg))?;
    log::info!("{} training tiles, {} generator parameters", tiles.len(), model.params.numel("gen."));
    let mut trainer = Trainer::new(model, TrainConfig::from_pipeline(&cfg), tiles)?
        .with_checkpoints(&out)?
        .with_log_file(&out.join("train.tsv"))?;
    let log = trainer.run()?;
    for path in &log.checkpoints {
        println!("{}", path.display());
    }
    Ok(())
}

fn load_model(path: &Path) -> Result<(Model, String)> {
    let (model, _) = checkpoint::load(path)?;
    let id = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    Ok((model, id))
}

fn tile_mask(a: &CompleteArgs, tile: &Tile) -> Result<Mask> {
    Ok(match (&a.mask, &a.mask_png) {
        (Some(hole), _) => Mask::rect(tile.height(), tile.width(), *hole)?,
        (None, Some(p)) => Mask::load_png(p)?,
        (None, None) => bail!("--mask or --mask-png is required with --tile"),
    })
}

fn complete_cmd(cfg: &PipelineConfig, a: &CompleteArgs) -> Result<()> {
    let (model, ckpt) = load_model(&a.checkpoint)?;
    let mut jobs: Vec<(PathBuf, CompletionRequest)> = Vec::new();
    match (&a.tile, &a.manifest) {
        (Some(tile_path), None) => {
            let tile = Tile::load_png(tile_path)?;
            let mask = tile_mask(a, &tile)?;
            jobs.push((a.out.clone(), CompletionRequest { tile, mask, emit_intermediate: a.intermediate }));
        }
        (None, Some(manifest_path)) => {
            let manifest = Manifest::load(manifest_path)?;
            let dir = manifest_path.parent().unwrap_or(Path::new("."));
            std::fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
            for r in manifest.split(Split::Test) {
                let tile = Tile::load_png(&r.resolve(dir))?;
                let mask = match r.hole {
                    Some(h) => Mask::rect(tile.height(), tile.width(), h)?,
                    None => random_mask(&cfg.mask_geometry(), manifest.header.seed ^ hash_id(&r.id))?,
                };
                let out = a.out.join(format!("{}_completed.png", r.id));
                jobs.push((out, CompletionRequest { tile, mask, emit_intermediate: a.intermediate }));
            }
        }
        _ => bail!("give --tile or --manifest"),
    }
    for (out, req) in &jobs {
        let c = complete_request(&model, req, cfg.hole_fill)?;
        write_completion(out, &c, &ckpt, &req.mask)?;
        if let Some(raw) = &c.raw {
            raw.save_png(&out.with_extension("raw.png"))?;
        }
        println!("{} ({:.1} ms)", out.display(), c.elapsed_ms);
    }
    Ok(())
}

/// Stable per-tile seed component.
fn hash_id(id: &str) -> u64 {
    id.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| (h ^ b as u64).wrapping_mul(0x100_0000_01b3))
}

fn eval(cfg: &PipelineConfig, a: &EvalArgs) -> Result<()> {
    let (model, _) = load_model(&a.checkpoint)?;
    let manifest = Manifest::load(&a.manifest)?;
    let dir = a.manifest.parent().unwrap_or(Path::new("."));
    std::fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    let geom = deepstreet::MaskGeometry { tile_px: model.config.tile_px, ..cfg.mask_geometry() };
    let mut report = EvalReport::default();
    for r in manifest.split(a.split).take(a.limit.unwrap_or(usize::MAX)) {
        let truth = Tile::load_png(&r.resolve(dir))?;
        let mask = match r.hole {
            Some(h) => Mask::rect(truth.height(), truth.width(), h)?,
            None => random_mask(&geom, manifest.header.seed ^ hash_id(&r.id))?,
        };
        let completed = deepstreet::completion::complete(&model, &truth, &mask, cfg.hole_fill)?;
        let masked = apply_mask(&truth, &mask, cfg.hole_fill)?;
        let montage_dir = (!a.no_montages).then_some(a.out.as_path());
        report.records.push(evaluate_tile(&r.id, &truth, &masked, &completed.tile, &mask, montage_dir)?);
    }
    let path = a.out.join("report.tsv");
    report.save(&path)?;
    println!(
        "{}: {} tiles, mean hole MSE {:.3}, mean connectivity proxy {:.3}",
        path.display(),
        report.records.len(),
        report.mean_hole_mse(),
        report.mean_connectivity()
    );
    Ok(())
}

fn serve(cfg: &PipelineConfig, a: &ServeArgs) -> Result<()> {
    let state = AppState::load(a.checkpoint.as_deref(), a.manifest.as_deref(), Some(&cfg.checkpoint_dir), cfg.hole_fill)?;
    if state.model.is_none() {
        log::warn!("no checkpoint given; serving in degraded mode");
    }
    let rt = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    rt.block_on(api::serve(state, a.addr))
}
