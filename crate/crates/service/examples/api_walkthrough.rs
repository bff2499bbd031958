//! Exercise every API route in-process: health, tiles, checkpoints and completions.
//!
//! cargo run --example api_walkthrough

use axum::body::Body;
use axum::http::Request;
use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine;
use deepstreet::checkpoint::{self, Counters};
use deepstreet::network::{Model, NetworkConfig};
use deepstreet::synth::gridiron_set;
use deepstreet::PipelineConfig;
use deepstreet_service::{router, AppState};
use http_body_util::BodyExt;
use serde_json::json;
use tower::ServiceExt;

async fn show(app: &axum::Router, req: Request<Body>) -> anyhow::Result<()> {
    let line = format!("{} {}", req.method(), req.uri());
    let resp = app.clone().oneshot(req).await?;
    let status = resp.status();
    let body = resp.into_body().collect().await?.to_bytes();
    let text = String::from_utf8_lossy(&body);
    let text = if text.len() > 160 { format!("{}...", &text[..160]) } else { text.into_owned() };
    println!("{line} -> {status}\n  {text}");
    Ok(())
}

#[tokio::main]
async fn main() -> anyhow::Result<()> {
    let dir = tempfile::tempdir()?;
    let ckpt = dir.path().join("desk.ckpt");
    checkpoint::save(&ckpt, &Model::build(NetworkConfig::from_pipeline(&PipelineConfig::desk()))?, Counters::default())?;

    show(&router(AppState::default()), Request::get("/api/health").body(Body::empty())?).await?;
    let app = router(AppState::load(Some(&ckpt), None, None, 0)?);
    show(&app, Request::get("/api/health").body(Body::empty())?).await?;
    show(&app, Request::get("/api/checkpoints").body(Body::empty())?).await?;

    let tile = B64.encode(gridiron_set(1, 64, 2)?.remove(0).encode_png()?);
    for mask in [json!(null), json!({ "row0": 24, "col0": 24, "height": 16, "width": 16 }), json!({ "row0": 60, "col0": 0, "height": 16, "width": 16 })] {
        let body = json!({ "tile_png": tile, "mask": mask }).to_string();
        show(&app, Request::post("/api/complete").header("content-type", "application/json").body(Body::from(body))?).await?;
    }
    Ok(())
}
