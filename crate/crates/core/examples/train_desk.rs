//! Desk-scale training on synthetic gridiron tiles: all three phases with
//! checkpoints and a TSV log.
//!
//! cargo run --release --example train_desk -- [out_dir] [iterations per phase]

use std::path::PathBuf;

use deepstreet::network::{Model, NetworkConfig};
use deepstreet::synth::gridiron_set;
use deepstreet::training::{Phase, TrainConfig, Trainer};
use deepstreet::PipelineConfig;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let mut args = std::env::args().skip(1);
    let out = PathBuf::from(args.next().unwrap_or_else(|| "desk-run".into()));
    let iters: usize = args.next().map_or(Ok(200), |s| s.parse())?;

    let cfg = PipelineConfig { generator_iters: iters, discriminator_iters: iters / 4, joint_iters: iters, ..PipelineConfig::desk() };
    let model = Model::build(NetworkConfig::from_pipeline(&cfg))?;
    let tiles = gridiron_set(16, cfg.tile_px, 1)?;
    let mut trainer = Trainer::new(model, TrainConfig::from_pipeline(&cfg), tiles)?
        .with_checkpoints(&out)?
        .with_log_file(&out.join("train.tsv"))?;
    let log = trainer.run()?;

    for phase in [Phase::Generator, Phase::Discriminator, Phase::Joint] {
        let recs: Vec<_> = log.phase(phase).collect();
        if let (Some(first), Some(last)) = (recs.first(), recs.last()) {
            println!(
                "phase {phase}: mse {:.3} -> {:.3}, d_loss {:.4} -> {:.4}",
                first.mse, last.mse, first.d_loss, last.d_loss
            );
        }
    }
    for c in &log.checkpoints {
        println!("{}", c.display());
    }
    Ok(())
}
