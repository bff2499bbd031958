use std::path::Path;
use std::process::{Command, Output};

use deepstreet::raster::{Manifest, Split};
use deepstreet::synth::{gridiron_tile, GridSpec, Slope};
use deepstreet::{PipelineConfig, Tile};

fn run(args: &[&str], config: Option<&Path>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_deepstreet"));
    cmd.args(args).env_remove("DEEPSTREET_CONFIG").env("RUST_LOG", "warn");
    if let Some(c) = config {
        cmd.env("DEEPSTREET_CONFIG", c);
    }
    cmd.output().unwrap()
}

fn ok(out: &Output) {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Desk-sized config with a tiny schedule.
fn desk_config(dir: &Path) -> std::path::PathBuf {
    let cfg = PipelineConfig {
        batch_size: 2,
        generator_iters: 2,
        discriminator_iters: 1,
        joint_iters: 2,
        data_dir: dir.join("data"),
        checkpoint_dir: dir.join("ckpt"),
        ..PipelineConfig::desk()
    };
    let path = dir.join("desk.toml");
    std::fs::write(&path, cfg.to_toml()).unwrap();
    path
}

#[test]
fn usage_errors_exit_two_and_missing_inputs_exit_one() {
    assert_eq!(run(&["frobnicate"], None).status.code(), Some(2));
    assert_eq!(run(&[], None).status.code(), Some(2));
    assert_eq!(run(&["--help"], None).status.code(), Some(0));
    let out = run(&["sample", "--raster", "/nonexistent.png", "--count", "1", "--out", "/tmp/x"], None);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("error"));
    assert_eq!(run(&["eval", "--checkpoint", "/no.ckpt", "--manifest", "/no.tsv", "--out", "/tmp/x"], None).status.code(), Some(1));
    assert_eq!(run(&["ingest", "--roads", "/no", "--dem", "/no", "--out", "/tmp/x.png"], Some(Path::new("/no/config.toml"))).status.code(), Some(1));
}

#[test]
fn ingest_writes_a_raster_matching_the_dem_extent() {
    let dir = tempfile::tempdir().unwrap();
    let roads = dir.path().join("roads.txt");
    std::fs::write(&roads, "LINESTRING (0 45, 90 45);highway=primary\nLINESTRING (45 0, 45 90);class=class3;width_m=6\n").unwrap();
    let dem = dir.path().join("dem.asc");
    std::fs::write(&dem, "ncols 3\nnrows 3\nxllcorner 0\nyllcorner 0\ncellsize 30\n0 10 20\n30 40 50\n60 70 511\n").unwrap();
    let out = dir.path().join("city.png");
    ok(&run(&["ingest", "--roads", s(&roads), "--dem", s(&dem), "--out", s(&out)], None));
    let city = Tile::load_png(&out).unwrap();
    assert_eq!((city.height(), city.width()), (18, 18));
    assert_eq!(city.road_code(9, 0), (255, 0));
    assert_eq!(city.road_code(0, 9), (0, 0));
    assert_eq!(city.get(2, 17, 17), 0);
    assert_eq!(city.get(2, 0, 0), 255);
}

#[test]
fn sample_is_reproducible_and_disjoint() {
    let dir = tempfile::tempdir().unwrap();
    let raster = dir.path().join("city.png");
    let slope = Slope { base_m: 50.0, slope_x: 0.05, slope_y: 0.0 };
    gridiron_tile(512, 5.0, &GridSpec::default(), slope).unwrap().save_png(&raster).unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for out in [&a, &b] {
        ok(&run(&["sample", "--raster", s(&raster), "--count", "4", "--policy", "disjoint", "--seed", "3", "--holes", "--out", s(out)], None));
    }
    let manifest = Manifest::load(&a.join("manifest.tsv")).unwrap();
    assert_eq!(manifest.records.len(), 4);
    assert_eq!(manifest.split(Split::Train).count(), 3);
    assert!(manifest.split(Split::Test).all(|r| r.hole.is_some()));
    for (i, r) in manifest.records.iter().enumerate() {
        assert_eq!((r.row % 256, r.col % 256), (0, 0));
        assert!(manifest.records[i + 1..].iter().all(|o| (o.row, o.col) != (r.row, r.col)));
        assert_eq!(std::fs::read(a.join(&r.path)).unwrap(), std::fs::read(b.join(&r.path)).unwrap());
    }
    assert_eq!(std::fs::read(a.join("manifest.tsv")).unwrap(), std::fs::read(b.join("manifest.tsv")).unwrap());
    let out = run(&["sample", "--raster", s(&raster), "--count", "5", "--out", s(&a)], None);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn train_complete_and_eval_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let config = desk_config(dir.path());
    let raster = dir.path().join("city.png");
    let slope = Slope { base_m: 50.0, slope_x: 0.05, slope_y: 0.02 };
    gridiron_tile(256, 5.0, &GridSpec::default(), slope).unwrap().save_png(&raster).unwrap();
    let data = dir.path().join("data");
    ok(&run(&["sample", "--raster", s(&raster), "--count", "10", "--out", s(&data)], Some(&config)));
    ok(&run(&["train"], Some(&config)));
    let ckpt = dir.path().join("ckpt");
    for name in ["phase1_0000002.ckpt", "phase2_0000001.ckpt", "phase3_0000002.ckpt", "train.tsv"] {
        assert!(ckpt.join(name).exists(), "{name}");
    }
    let final_ckpt = ckpt.join("phase3_0000002.ckpt");
    let manifest = Manifest::load(&data.join("manifest.tsv")).unwrap();
    let tile_path = manifest.records[0].resolve(&data);
    let out = dir.path().join("done.png");
    ok(&run(&["complete", "--checkpoint", s(&final_ckpt), "--tile", s(&tile_path), "--mask", "24,24,16,16", "--intermediate", "--out", s(&out)], Some(&config)));
    assert!(out.exists() && out.with_extension("json").exists() && out.with_extension("raw.png").exists());
    let sidecar: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.with_extension("json")).unwrap()).unwrap();
    assert_eq!(sidecar["checkpoint"], "phase3_0000002");
    assert_eq!(sidecar["mask"]["row0"], 24);
    let missing_mask = run(&["complete", "--checkpoint", s(&final_ckpt), "--tile", s(&tile_path), "--out", s(&out)], Some(&config));
    assert_eq!(missing_mask.status.code(), Some(1));

    let report = dir.path().join("report");
    ok(&run(&["eval", "--checkpoint", s(&final_ckpt), "--manifest", s(&data.join("manifest.tsv")), "--out", s(&report)], Some(&config)));
    let tsv = std::fs::read_to_string(report.join("report.tsv")).unwrap();
    assert_eq!(tsv.lines().count(), 1 + manifest.split(Split::Test).count());
    assert!(tsv.starts_with("id\thole_mse\tconnectivity_proxy"));
    let montages = std::fs::read_dir(&report).unwrap().filter(|e| e.as_ref().unwrap().path().to_string_lossy().ends_with("_montage.png")).count();
    assert_eq!(montages, 2);

    let batch = dir.path().join("batch");
    ok(&run(&["complete", "--checkpoint", s(&final_ckpt), "--manifest", s(&data.join("manifest.tsv")), "--out", s(&batch)], Some(&config)));
    assert_eq!(std::fs::read_dir(&batch).unwrap().count(), 4);
}
