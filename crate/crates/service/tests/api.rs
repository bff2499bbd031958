use std::path::Path;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine;
use deepstreet::checkpoint::{self, Counters};
use deepstreet::network::{Model, NetworkConfig};
use deepstreet::raster::{Manifest, ManifestHeader, ManifestRecord, Split};
use deepstreet::synth::gridiron_set;
use deepstreet::Tile;
use deepstreet_service::api::CompleteResponse;
use deepstreet_service::{router, AppState};
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

fn net() -> NetworkConfig {
    NetworkConfig { scale: 0.125, tile_px: 64, crop_px: 32, generator_batch_norm: true, discriminator_batch_norm: false, seed: 4 }
}

/// A checkpoint, a two-tile manifest and the loaded state.
fn fixture(dir: &Path) -> (AppState, Vec<Tile>) {
    let ckpt_dir = dir.join("checkpoints");
    std::fs::create_dir_all(&ckpt_dir).unwrap();
    let model = Model::build(net()).unwrap();
    let ckpt = ckpt_dir.join("phase1_0000010.ckpt");
    checkpoint::save(&ckpt, &model, Counters { phase: 1, gen_steps: 10, ..Counters::default() }).unwrap();
    checkpoint::save(&ckpt_dir.join("phase3_0000020.ckpt"), &model, Counters::default()).unwrap();
    let tiles = gridiron_set(2, 64, 8).unwrap();
    std::fs::create_dir_all(dir.join("tiles")).unwrap();
    let records = tiles
        .iter()
        .enumerate()
        .map(|(i, t)| {
            let path = Path::new("tiles").join(format!("t{i}.png"));
            t.save_png(&dir.join(&path)).unwrap();
            ManifestRecord { id: format!("t{i}"), row: 0, col: 64 * i, split: Split::Train, path, hole: None }
        })
        .collect();
    let manifest = Manifest {
        header: ManifestHeader { pixel_size_m: 5.0, tile_px: 64, dem_min_m: 0.0, dem_max_m: 511.0, seed: 0 },
        records,
    };
    let mpath = dir.join("manifest.tsv");
    manifest.save(&mpath).unwrap();
    (AppState::load(Some(&ckpt), Some(&mpath), None, 0).unwrap(), tiles)
}

async fn call(state: &AppState, req: Request<Body>) -> (StatusCode, Vec<u8>) {
    let resp = router(state.clone()).oneshot(req).await.unwrap();
    let status = resp.status();
    (status, resp.into_body().collect().await.unwrap().to_bytes().to_vec())
}

async fn get(state: &AppState, uri: &str) -> (StatusCode, Vec<u8>) {
    call(state, Request::get(uri).body(Body::empty()).unwrap()).await
}

async fn post(state: &AppState, uri: &str, body: Value) -> (StatusCode, Value) {
    let req = Request::post(uri).header("content-type", "application/json").body(Body::from(body.to_string())).unwrap();
    let (status, bytes) = call(state, req).await;
    (status, serde_json::from_slice(&bytes).unwrap())
}

fn png_b64(t: &Tile) -> String {
    B64.encode(t.encode_png().unwrap())
}

fn decode(v: &Value) -> Tile {
    let r: CompleteResponse = serde_json::from_value(v.clone()).unwrap();
    Tile::decode_png(&B64.decode(r.image_png).unwrap()).unwrap()
}

#[tokio::test]
async fn health_reports_degraded_without_a_checkpoint() {
    let (status, body) = get(&AppState::default(), "/api/health").await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(serde_json::from_slice::<Value>(&body).unwrap()["status"], "degraded");
    let (status, body) = post(&AppState::default(), "/api/complete", json!({ "tile_id": "t0" })).await;
    assert_eq!(status, StatusCode::SERVICE_UNAVAILABLE);
    assert_eq!(body["error"], "degraded");

    let dir = tempfile::tempdir().unwrap();
    let (state, _) = fixture(dir.path());
    let (_, body) = get(&state, "/api/health").await;
    let v: Value = serde_json::from_slice(&body).unwrap();
    assert_eq!((v["status"].as_str(), v["tiles"].as_u64()), (Some("ok"), Some(2)));
}

#[tokio::test]
async fn all_context_mask_returns_the_request_image() {
    let dir = tempfile::tempdir().unwrap();
    let (state, tiles) = fixture(dir.path());
    let (status, body) = post(&state, "/api/complete", json!({ "tile_png": png_b64(&tiles[1]), "mask": null })).await;
    assert_eq!(status, StatusCode::OK, "{body}");
    assert_eq!(decode(&body), tiles[1]);
    assert_eq!(body["connectivity"], 1.0);
    let (_, body) = post(&state, "/api/complete", json!({ "tile_id": "t0" })).await;
    assert_eq!(decode(&body), tiles[0]);
}

#[tokio::test]
async fn identical_requests_give_identical_payloads() {
    let dir = tempfile::tempdir().unwrap();
    let (state, tiles) = fixture(dir.path());
    let req = json!({ "tile_png": png_b64(&tiles[0]), "mask": { "row0": 24, "col0": 20, "height": 16, "width": 16 } });
    let (s1, a) = post(&state, "/api/complete", req.clone()).await;
    let (s2, b) = post(&state, "/api/complete", req).await;
    assert_eq!((s1, s2), (StatusCode::OK, StatusCode::OK));
    let strip = |mut v: Value| {
        v.as_object_mut().unwrap().remove("elapsed_ms");
        v
    };
    assert_eq!(strip(a.clone()), strip(b));
    let out = decode(&a);
    for r in 0..64 {
        for c in 0..64 {
            let inside = (24..40).contains(&r) && (20..36).contains(&c);
            if !inside {
                assert_eq!(out.road_code(r, c), tiles[0].road_code(r, c));
            }
        }
    }
    assert_eq!(a["mask"], json!({ "row0": 24, "col0": 20, "height": 16, "width": 16 }));
}

#[tokio::test]
async fn malformed_requests_are_rejected_with_reasons() {
    let dir = tempfile::tempdir().unwrap();
    let (state, tiles) = fixture(dir.path());
    let tile = png_b64(&tiles[0]);
    for mask in [
        json!({ "row0": 60, "col0": 0, "height": 16, "width": 16 }),
        json!({ "row0": 0, "col0": 0, "height": 0, "width": 16 }),
        json!({ "row0": -1, "col0": 0, "height": 4, "width": 4 }),
        json!([1, 2, 3, 4]),
        json!({ "row0": 1 }),
    ] {
        let (status, body) = post(&state, "/api/complete", json!({ "tile_png": tile, "mask": mask })).await;
        assert_eq!(status, StatusCode::BAD_REQUEST, "{mask}");
        assert_eq!(body["error"], "invalid_mask");
        assert!(!body["reason"].as_str().unwrap().is_empty());
    }
    let (status, body) = post(&state, "/api/complete", json!({ "tile_png": "%%%" })).await;
    assert_eq!((status, body["error"].as_str()), (StatusCode::BAD_REQUEST, Some("invalid_tile")));
    let small = png_b64(&tiles[0].crop(0, 0, 32, 32).unwrap());
    let (status, body) = post(&state, "/api/complete", json!({ "tile_png": small })).await;
    assert_eq!((status, body["error"].as_str()), (StatusCode::BAD_REQUEST, Some("invalid_tile")));
    let (status, _) = post(&state, "/api/complete", json!({ "tile_png": tile, "tile_id": "t0" })).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let (status, body) = post(&state, "/api/complete", json!({ "tile_id": "nope" })).await;
    assert_eq!((status, body["error"].as_str()), (StatusCode::NOT_FOUND, Some("unknown_tile")));
    let (status, _) = post(&state, "/api/complete?checkpoint=missing", json!({ "tile_id": "t0" })).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    let (status, _) = post(&state, "/api/complete?checkpoint=phase3_0000020", json!({ "tile_id": "t0" })).await;
    assert_eq!(status, StatusCode::CONFLICT);
    let (status, _) = post(&state, "/api/complete?checkpoint=phase1_0000010", json!({ "tile_id": "t0" })).await;
    assert_eq!(status, StatusCode::OK);
    let req = Request::post("/api/complete").body(Body::from("{not json")).unwrap();
    let (status, body) = call(&state, req).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(serde_json::from_slice::<Value>(&body).unwrap()["error"], "bad_request");
}

#[tokio::test]
async fn tiles_and_checkpoints_are_listed() {
    let dir = tempfile::tempdir().unwrap();
    let (state, tiles) = fixture(dir.path());
    let (status, body) = get(&state, "/api/tiles?offset=1&limit=5").await;
    assert_eq!(status, StatusCode::OK);
    let v: Value = serde_json::from_slice(&body).unwrap();
    assert_eq!(v["total"], 2);
    assert_eq!(v["items"].as_array().unwrap().len(), 1);
    assert_eq!(v["items"][0]["id"], "t1");

    let (status, png) = get(&state, "/api/tiles/t1").await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(Tile::decode_png(&png).unwrap(), tiles[1]);
    assert_eq!(get(&state, "/api/tiles/zzz").await.0, StatusCode::NOT_FOUND);

    let (_, body) = get(&state, "/api/checkpoints").await;
    let v: Value = serde_json::from_slice(&body).unwrap();
    let ids: Vec<&str> = v["items"].as_array().unwrap().iter().map(|i| i["id"].as_str().unwrap()).collect();
    assert_eq!(ids, ["phase1_0000010", "phase3_0000020"]);
    assert_eq!(v["items"][0]["active"], true);
    assert_eq!(v["items"][0]["gen_steps"], 10);
    assert_eq!(v["active"], "phase1_0000010");
}

#[tokio::test]
async fn service_never_writes() {
    let dir = tempfile::tempdir().unwrap();
    let (state, tiles) = fixture(dir.path());
    let snapshot = || {
        let mut files: Vec<(String, Vec<u8>)> = Vec::new();
        for sub in ["", "tiles", "checkpoints"] {
            for e in std::fs::read_dir(dir.path().join(sub)).unwrap() {
                let p = e.unwrap().path();
                if p.is_file() {
                    files.push((p.display().to_string(), std::fs::read(&p).unwrap()));
                }
            }
        }
        files.sort();
        files
    };
    let before = snapshot();
    let mask = json!({ "row0": 10, "col0": 10, "height": 16, "width": 16 });
    post(&state, "/api/complete", json!({ "tile_id": "t0", "mask": mask })).await;
    post(&state, "/api/complete", json!({ "tile_png": png_b64(&tiles[1]), "mask": mask })).await;
    get(&state, "/api/checkpoints").await;
    assert_eq!(before, snapshot());
}
