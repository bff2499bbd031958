//! Read-only JSON API over one loaded checkpoint and one tile manifest.
//!
//! | route                 | result                                              |
//! |-----------------------|-----------------------------------------------------|
//! | `GET /api/health`     | `{"status": "ok" \| "degraded", ...}`               |
//! | `GET /api/tiles`      | manifest page, `?offset=&limit=`                    |
//! | `GET /api/tiles/{id}` | tile PNG                                            |
//! | `POST /api/complete`  | completed PNG (base64), elapsed ms, connectivity    |
//! | `GET /api/checkpoints`| checkpoints found in the checkpoint directory       |
//!
//! Errors are `{"error": <code>, "reason": <text>}`.

use std::io::Read;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::Context;
use axum::body::Bytes;
use axum::extract::{Path as UrlPath, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine;
use deepstreet::checkpoint::{self, CheckpointHeader};
use deepstreet::completion::complete;
use deepstreet::evaluation::boundary_stub_connectivity;
use deepstreet::network::Model;
use deepstreet::raster::Manifest;
use deepstreet::{HoleRect, Mask, Tile};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

/// Shared, immutable service state.
#[derive(Clone, Default)]
pub struct AppState {
    pub model: Option<Arc<Model>>,
    /// File stem of the loaded checkpoint.
    pub checkpoint: Option<String>,
    pub manifest: Option<Arc<Manifest>>,
    pub manifest_dir: PathBuf,
    pub checkpoint_dir: Option<PathBuf>,
    pub hole_fill: u8,
}

impl AppState {
    /// Loads whatever is given; a missing checkpoint leaves the service degraded.
    pub fn load(
        checkpoint: Option<&Path>,
        manifest: Option<&Path>,
        checkpoint_dir: Option<&Path>,
        hole_fill: u8,
    ) -> anyhow::Result<Self> {
        let mut state = AppState { hole_fill, ..Default::default() };
        if let Some(path) = checkpoint {
            let (model, _) = checkpoint::load(path).with_context(|| format!("loading {}", path.display()))?;
            state.model = Some(Arc::new(model));
            state.checkpoint = Some(stem(path));
            state.checkpoint_dir = path.parent().map(Path::to_path_buf);
        }
        if let Some(dir) = checkpoint_dir {
            state.checkpoint_dir = Some(dir.to_path_buf());
        }
        if let Some(path) = manifest {
            let m = Manifest::load(path).with_context(|| format!("loading {}", path.display()))?;
            state.manifest = Some(Arc::new(m));
            state.manifest_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        }
        Ok(state)
    }

    fn tile_bytes(&self, id: &str) -> Result<Vec<u8>, ApiError> {
        let record = self
            .manifest
            .as_ref()
            .and_then(|m| m.find(id))
            .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, "unknown_tile", format!("no tile `{id}`")))?;
        let path = record.resolve(&self.manifest_dir);
        std::fs::read(&path).map_err(|e| ApiError::internal(format!("reading {}: {e}", path.display())))
    }

    fn checkpoints(&self) -> Vec<(String, CheckpointHeader)> {
        let Some(dir) = &self.checkpoint_dir else { return Vec::new() };
        let Ok(entries) = std::fs::read_dir(dir) else { return Vec::new() };
        let mut out: Vec<(String, CheckpointHeader)> = entries
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|e| e == "ckpt"))
            .filter_map(|p| read_header(&p).map(|h| (stem(&p), h)))
            .collect();
        out.sort_by(|a, b| a.0.cmp(&b.0));
        out
    }
}

fn stem(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

fn read_header(path: &Path) -> Option<CheckpointHeader> {
    let mut buf = Vec::with_capacity(128);
    std::fs::File::open(path).ok()?.take(128).read_to_end(&mut buf).ok()?;
    checkpoint::read_header_bytes(&buf).ok()
}

#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub code: &'static str,
    pub reason: String,
}

impl ApiError {
    fn new(status: StatusCode, code: &'static str, reason: impl Into<String>) -> Self {
        Self { status, code, reason: reason.into() }
    }

    fn bad(code: &'static str, reason: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, code, reason)
    }

    fn internal(reason: impl Into<String>) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, "completion_failed", reason)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(json!({ "error": self.code, "reason": self.reason }))).into_response()
    }
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/api/health", get(health))
        .route("/api/tiles", get(list_tiles))
        .route("/api/tiles/{id}", get(get_tile))
        .route("/api/complete", post(complete_tile))
        .route("/api/checkpoints", get(list_checkpoints))
        .with_state(state)
}

pub async fn serve(state: AppState, addr: SocketAddr) -> anyhow::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await.with_context(|| format!("binding {addr}"))?;
    log::info!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(state)).await?;
    Ok(())
}

async fn health(State(s): State<AppState>) -> Json<Value> {
    let status = if s.model.is_some() { "ok" } else { "degraded" };
    let tiles = s.manifest.as_ref().map_or(0, |m| m.records.len());
    Json(json!({ "status": status, "checkpoint": s.checkpoint, "tiles": tiles }))
}

#[derive(Deserialize)]
struct Page {
    #[serde(default)]
    offset: usize,
    limit: Option<usize>,
}

async fn list_tiles(State(s): State<AppState>, Query(page): Query<Page>) -> Json<Value> {
    let limit = page.limit.unwrap_or(100).min(1000);
    let records = s.manifest.as_ref().map_or(&[][..], |m| &m.records[..]);
    let items: Vec<Value> = records
        .iter()
        .skip(page.offset)
        .take(limit)
        .map(|r| json!({ "id": r.id, "row": r.row, "col": r.col, "split": r.split.to_string(), "hole": r.hole }))
        .collect();
    Json(json!({ "total": records.len(), "offset": page.offset, "items": items }))
}

async fn get_tile(State(s): State<AppState>, UrlPath(id): UrlPath<String>) -> Result<Response, ApiError> {
    let bytes = s.tile_bytes(&id)?;
    Ok(([(header::CONTENT_TYPE, "image/png")], bytes).into_response())
}

async fn list_checkpoints(State(s): State<AppState>) -> Json<Value> {
    let items: Vec<Value> = s
        .checkpoints()
        .into_iter()
        .map(|(id, h)| {
            json!({
                "id": id,
                "active": s.checkpoint.as_deref() == Some(id.as_str()),
                "phase": h.counters.phase,
                "gen_steps": h.counters.gen_steps,
                "disc_steps": h.counters.disc_steps,
                "tile_px": h.network.tile_px,
                "scale": h.network.scale,
            })
        })
        .collect();
    Json(json!({ "active": s.checkpoint, "items": items }))
}

/// Body of `POST /api/complete`: exactly one of `tile_id` and `tile_png`;
/// `mask` is `{row0, col0, height, width}` or absent/null for no hole.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompleteRequest {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tile_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tile_png: Option<String>,
    #[serde(default)]
    pub mask: Value,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompleteResponse {
    pub image_png: String,
    pub elapsed_ms: f64,
    pub connectivity: f64,
    pub checkpoint: String,
    pub mask: Option<HoleRect>,
}

#[derive(Deserialize)]
struct CompleteQuery {
    checkpoint: Option<String>,
}

fn parse_mask(value: &Value, tile: &Tile) -> Result<Mask, ApiError> {
    let (h, w) = (tile.height(), tile.width());
    if value.is_null() {
        return Ok(Mask::full(h, w));
    }
    if !value.is_object() {
        return Err(ApiError::bad("invalid_mask", "mask must be an object {row0, col0, height, width} or null"));
    }
    let hole: HoleRect = serde_json::from_value(value.clone())
        .map_err(|e| ApiError::bad("invalid_mask", format!("expected {{row0, col0, height, width}}: {e}")))?;
    Mask::rect(h, w, hole).map_err(|e| ApiError::bad("invalid_mask", e.to_string()))
}

async fn complete_tile(
    State(s): State<AppState>,
    Query(q): Query<CompleteQuery>,
    body: Bytes,
) -> Result<Json<CompleteResponse>, ApiError> {
    let req: CompleteRequest =
        serde_json::from_slice(&body).map_err(|e| ApiError::bad("bad_request", e.to_string()))?;
    let (Some(model), Some(active)) = (s.model.clone(), s.checkpoint.clone()) else {
        return Err(ApiError::new(StatusCode::SERVICE_UNAVAILABLE, "degraded", "no checkpoint loaded"));
    };
    if let Some(want) = q.checkpoint.filter(|c| *c != active) {
        return Err(if s.checkpoints().iter().any(|(id, _)| *id == want) {
            ApiError::new(StatusCode::CONFLICT, "inactive_checkpoint", format!("`{want}` is not loaded; active is `{active}`"))
        } else {
            ApiError::new(StatusCode::NOT_FOUND, "unknown_checkpoint", format!("no checkpoint `{want}`"))
        });
    }
    let png = match (&req.tile_id, &req.tile_png) {
        (Some(id), None) => s.tile_bytes(id)?,
        (None, Some(b64)) => B64.decode(b64).map_err(|e| ApiError::bad("invalid_tile", format!("base64: {e}")))?,
        _ => return Err(ApiError::bad("bad_request", "give exactly one of tile_id and tile_png")),
    };
    let tile = Tile::decode_png(&png).map_err(|e| ApiError::bad("invalid_tile", e.to_string()))?;
    let side = model.config.tile_px;
    if tile.side() != Some(side) {
        return Err(ApiError::bad(
            "invalid_tile",
            format!("checkpoint expects {side}x{side} tiles, got {}x{}", tile.height(), tile.width()),
        ));
    }
    let mask = parse_mask(&req.mask, &tile)?;
    let fill = s.hole_fill;
    let done = tokio::task::spawn_blocking(move || {
        let c = complete(&model, &tile, &mask, fill)?;
        let connectivity = boundary_stub_connectivity(&c.tile, &mask)?;
        Ok::<_, deepstreet::Error>((c.tile.encode_png()?, c.elapsed_ms, connectivity))
    })
    .await
    .map_err(|e| ApiError::internal(e.to_string()))?;
    let (png, elapsed_ms, connectivity) = done.map_err(|e| ApiError::internal(e.to_string()))?;
    Ok(Json(CompleteResponse { image_png: B64.encode(png), elapsed_ms, connectivity, checkpoint: active, mask: mask.hole }))
}
