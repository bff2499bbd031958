use deepstreet::checkpoint;
use deepstreet::completion::complete;
use deepstreet::mask::HoleRect;
use deepstreet::network::{Model, NetworkConfig};
use deepstreet::synth::gridiron_set;
use deepstreet::training::{Objective, Phase, TrainConfig, Trainer};
use deepstreet::{Mask, MaskGeometry};
use proptest::prelude::*;

fn net(seed: u64) -> NetworkConfig {
    NetworkConfig { scale: 0.125, tile_px: 64, crop_px: 32, generator_batch_norm: true, discriminator_batch_norm: false, seed }
}

fn small_config(alpha: f64, objective: Objective) -> TrainConfig {
    TrainConfig {
        alpha,
        objective,
        batch_size: 4,
        generator_iters: 10,
        discriminator_iters: 5,
        joint_iters: 10,
        ..TrainConfig::desk()
    }
}

fn trainer(cfg: TrainConfig) -> Trainer {
    Trainer::new(Model::build(net(7)).unwrap(), cfg, gridiron_set(8, 64, 1).unwrap()).unwrap()
}

/// Loss columns with the timing column dropped.
fn trace(t: &Trainer, phase: Option<Phase>) -> Vec<[u32; 4]> {
    t.log
        .records
        .iter()
        .filter(|r| phase.is_none_or(|p| r.phase == p))
        .map(|r| [r.mse.to_bits(), r.mse_per_px.to_bits(), r.d_loss.to_bits(), r.g_adv.to_bits()])
        .collect()
}

fn generator_bits(m: &Model) -> Vec<u32> {
    m.params.tensors.iter().filter(|(k, _)| k.starts_with("gen.")).flat_map(|(_, t)| t.data().iter().map(|v| v.to_bits())).collect()
}

#[test]
fn same_seed_same_run() {
    let mut a = trainer(small_config(0.001, Objective::Combined));
    let mut b = trainer(small_config(0.001, Objective::Combined));
    a.run().unwrap();
    b.run().unwrap();
    assert_eq!(trace(&a, None), trace(&b, None));
    assert_eq!(a.model, b.model);
    assert_eq!(a.log.records.len(), 25);
    assert!(a.log.records.iter().all(|r| r.mse.is_finite() && r.d_loss.is_finite() && r.g_adv.is_finite()));
    let mut c = trainer(TrainConfig { seed: 1, ..small_config(0.001, Objective::Combined) });
    c.run_phase(Phase::Generator, 3).unwrap();
    assert_ne!(trace(&c, None), trace(&a, Some(Phase::Generator))[..3].to_vec());
}

#[test]
fn zero_alpha_matches_pure_mse() {
    let mut combined = trainer(small_config(0.0, Objective::Combined));
    let mut pure = trainer(small_config(0.0, Objective::PureMse));
    combined.run().unwrap();
    pure.run().unwrap();
    assert!(pure.log.phase(Phase::Discriminator).next().is_none());
    let g = |t: &Trainer| -> Vec<u32> {
        t.log.records.iter().filter(|r| r.phase != Phase::Discriminator).map(|r| r.mse.to_bits()).collect()
    };
    assert_eq!(g(&combined), g(&pure));
    assert_eq!(generator_bits(&combined.model), generator_bits(&pure.model));
}

#[test]
fn checkpoints_resume_to_identical_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let mut t = trainer(TrainConfig { checkpoint_every: 4, ..small_config(0.001, Objective::Combined) })
        .with_checkpoints(dir.path())
        .unwrap()
        .with_log_file(&dir.path().join("train.tsv"))
        .unwrap();
    t.run_phase(Phase::Generator, 10).unwrap();
    let names: Vec<String> =
        t.log.checkpoints.iter().map(|p| p.file_name().unwrap().to_string_lossy().into_owned()).collect();
    assert_eq!(names, ["phase1_0000004.ckpt", "phase1_0000008.ckpt", "phase1_0000010.ckpt"]);
    let (loaded, counters) = checkpoint::load_matching(t.log.checkpoints.last().unwrap(), &net(0)).unwrap();
    assert_eq!(counters.gen_steps, 10);
    assert_eq!(loaded, t.model);
    let tile = gridiron_set(1, 64, 9).unwrap().remove(0);
    let mask = Mask::rect(64, 64, HoleRect::centered(32, 32, 16, 16).unwrap()).unwrap();
    assert_eq!(complete(&loaded, &tile, &mask, 0).unwrap().tile, complete(&t.model, &tile, &mask, 0).unwrap().tile);
    let log = std::fs::read_to_string(dir.path().join("train.tsv")).unwrap();
    assert_eq!(log.lines().count(), 11);
}

#[test]
fn trainer_rejects_bad_inputs() {
    let tiles = gridiron_set(2, 64, 1).unwrap();
    assert!(Trainer::new(Model::build(net(1)).unwrap(), TrainConfig::desk(), tiles).is_err());
    let tiles = gridiron_set(8, 32, 1).unwrap();
    assert!(Trainer::new(Model::build(net(1)).unwrap(), TrainConfig::desk(), tiles).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn completion_never_touches_context(model_seed: u64, tile_seed: u64, mask_seed: u64, fill in prop::sample::select(vec![0u8, 255])) {
        let model = Model::build(net(model_seed)).unwrap();
        let tile = gridiron_set(1, 64, tile_seed).unwrap().remove(0);
        let mask = deepstreet::random_mask(&MaskGeometry::DESK, mask_seed).unwrap();
        let out = complete(&model, &tile, &mask, fill).unwrap().tile;
        for ch in 0..3 {
            for r in 0..64 {
                for c in 0..64 {
                    if !mask.in_hole(r, c) {
                        prop_assert_eq!(out.get(ch, r, c), tile.get(ch, r, c));
                    }
                }
            }
        }
    }
}
