//! HTTP job service: submit a manipulation, poll its trace, fetch results.
//!
//! Work runs on the blocking pool behind a FIFO semaphore, so at most
//! `max_concurrent_jobs` runs execute at once and the status endpoint only
//! ever reads the job table.

pub mod jobs;

use std::path::PathBuf;
use std::sync::Arc;

use axum::extract::{DefaultBodyLimit, FromRequest, Multipart, Path, Query, Request, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Deserialize;
use tokio::sync::Semaphore;
use tower_http::services::ServeDir;

use salmanip_core::image::{io, resample_to, rgb_to_lab};
use salmanip_core::pipeline::{compute_saliency_file, run_manipulation_observed};
use salmanip_core::saliency::compute_saliency;
use salmanip_core::{ManipulationConfig, Mask, Mode, RgbImage};

pub use jobs::{ArtifactKind, JobStatus, JobStore};

/// Widest image the saliency preview is computed at.
pub const PREVIEW_MAX_WIDTH: usize = 400;
const MAX_UPLOAD_BYTES: usize = 64 * 1024 * 1024;

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub max_concurrent_jobs: usize,
    pub persist_dir: Option<PathBuf>,
    pub static_dir: Option<PathBuf>,
    /// Applied to every submitted job before per-request fields.
    pub base_config: ManipulationConfig,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            max_concurrent_jobs: 2,
            persist_dir: None,
            static_dir: None,
            base_config: ManipulationConfig::default(),
        }
    }
}

#[derive(Clone)]
pub struct AppState {
    pub store: JobStore,
    permits: Arc<Semaphore>,
    base_config: ManipulationConfig,
}

pub fn router(cfg: ServiceConfig) -> Router {
    let state = AppState {
        store: JobStore::new(cfg.persist_dir),
        permits: Arc::new(Semaphore::new(cfg.max_concurrent_jobs.max(1))),
        base_config: cfg.base_config,
    };
    let api = Router::new()
        .route("/api/jobs", post(submit_job))
        .route("/api/jobs/{id}", get(get_status))
        .route("/api/jobs/{id}/artifact", get(get_artifact))
        .route("/api/saliency", post(preview_saliency))
        .layer(DefaultBodyLimit::max(MAX_UPLOAD_BYTES))
        .with_state(state);
    match cfg.static_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api,
    }
}

/// JSON error body `{"error": reason}`.
#[derive(Debug)]
pub struct ApiError(StatusCode, String);

impl ApiError {
    fn bad_request(msg: impl Into<String>) -> Self {
        Self(StatusCode::BAD_REQUEST, msg.into())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.0, Json(serde_json::json!({ "error": self.1 }))).into_response()
    }
}

#[derive(Default)]
struct Submission {
    image: Option<Vec<u8>>,
    mask: Option<Vec<u8>>,
    fields: Vec<(String, String)>,
}

async fn read_multipart(mut mp: Multipart) -> Result<Submission, ApiError> {
    let mut sub = Submission::default();
    while let Some(field) = mp.next_field().await.map_err(|e| ApiError::bad_request(e.body_text()))? {
        let name = field.name().unwrap_or_default().to_string();
        let bytes = field.bytes().await.map_err(|e| ApiError::bad_request(e.body_text()))?.to_vec();
        match name.as_str() {
            "image" => sub.image = Some(bytes),
            "mask" => sub.mask = Some(bytes),
            _ => {
                let text = String::from_utf8(bytes)
                    .map_err(|_| ApiError::bad_request(format!("field {name} is not text")))?;
                sub.fields.push((name, text.trim().to_string()));
            }
        }
    }
    Ok(sub)
}

fn parse_field<T: std::str::FromStr>(name: &str, value: &str) -> Result<T, ApiError> {
    value.parse().map_err(|_| ApiError::bad_request(format!("invalid {name}")))
}

/// Per-request fields layered on the service defaults.
fn job_config(base: &ManipulationConfig, fields: &[(String, String)]) -> Result<(Mode, ManipulationConfig), ApiError> {
    let mut cfg = *base;
    let mut mode = Mode::Enhance;
    for (name, value) in fields {
        match name.as_str() {
            "mode" => mode = value.parse().map_err(|_| ApiError::bad_request("invalid mode"))?,
            "delta_s" => {
                let v: f64 = parse_field(name, value)?;
                if !(0.0..=1.0).contains(&v) {
                    return Err(ApiError::bad_request("delta_s out of range"));
                }
                cfg.delta_s = v;
            }
            "seed" => cfg.seed = parse_field(name, value)?,
            "lambda" => cfg.lambda = parse_field(name, value)?,
            "eta" => cfg.eta = parse_field(name, value)?,
            "epsilon" => cfg.epsilon = parse_field(name, value)?,
            "beta_top" => cfg.beta_top = parse_field(name, value)?,
            "coarse_width" => cfg.coarse_width = parse_field(name, value)?,
            "iters_coarse" => cfg.iters_coarse = parse_field(name, value)?,
            "iters_fine" => cfg.iters_fine = parse_field(name, value)?,
            "patch_size" => cfg.synth.patch_size = parse_field(name, value)?,
            "saliency_patch" => cfg.sal.patch_size = parse_field(name, value)?,
            other => return Err(ApiError::bad_request(format!("unknown field {other}"))),
        }
    }
    cfg.validate().map_err(|e| ApiError::bad_request(e.to_string()))?;
    Ok((mode, cfg))
}

fn decode_inputs(sub: &Submission) -> Result<(RgbImage, Mask), ApiError> {
    let image = sub.image.as_deref().ok_or_else(|| ApiError::bad_request("missing image"))?;
    let mask = sub.mask.as_deref().ok_or_else(|| ApiError::bad_request("missing mask"))?;
    let image = io::decode_rgb_png(image).map_err(|e| ApiError::bad_request(format!("invalid image: {e}")))?;
    let mask = io::decode_mask_png(mask).map_err(|e| ApiError::bad_request(format!("invalid mask: {e}")))?;
    if mask.dimensions() != image.dimensions() {
        return Err(ApiError::bad_request("mask size mismatch"));
    }
    if !mask.is_proper() {
        return Err(ApiError::bad_request("mask must select some but not all pixels"));
    }
    Ok((image, mask))
}

fn saliency_png(img: &RgbImage, cfg: &ManipulationConfig) -> salmanip_core::Result<Vec<u8>> {
    let s = compute_saliency_file(img, &cfg.sal)?;
    io::encode_gray_png(s.width(), s.height(), &s.to_gray8())
}

fn execute(store: &JobStore, id: &str, image: &RgbImage, mask: &Mask, mode: Mode, cfg: &ManipulationConfig) {
    store.set_running(id);
    let run = run_manipulation_observed(image, mask, mode, cfg, &mut |entry| store.push_trace(id, entry));
    let finished = run.and_then(|out| {
        let artifacts = jobs::Artifacts {
            result: io::encode_rgb_png(&out.image)?,
            saliency_in: saliency_png(image, cfg)?,
            saliency_out: saliency_png(&out.image, cfg)?,
        };
        Ok((out.report, artifacts))
    });
    match finished {
        Ok((report, artifacts)) => store.finish(id, report, artifacts),
        Err(e) => store.fail(id, e.to_string()),
    }
}

async fn submit_job(State(state): State<AppState>, mp: Multipart) -> Result<Response, ApiError> {
    let sub = read_multipart(mp).await?;
    let (mode, cfg) = job_config(&state.base_config, &sub.fields)?;
    let (image, mask) = decode_inputs(&sub)?;
    let id = state.store.insert(mode, cfg);
    let (store, permits, job_id) = (state.store.clone(), state.permits.clone(), id.clone());
    tokio::spawn(async move {
        // Semaphore waiters are served in arrival order.
        let Ok(_permit) = permits.acquire_owned().await else {
            return;
        };
        let inner = store.clone();
        let id = job_id.clone();
        let joined =
            tokio::task::spawn_blocking(move || execute(&inner, &id, &image, &mask, mode, &cfg)).await;
        if let Err(e) = joined {
            store.fail(&job_id, format!("worker panicked: {e}"));
        }
    });
    Ok((StatusCode::ACCEPTED, Json(serde_json::json!({ "job_id": id }))).into_response())
}

fn not_found() -> ApiError {
    ApiError(StatusCode::NOT_FOUND, "unknown job".into())
}

async fn get_status(State(state): State<AppState>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let body = state.store.with(&id, |job| serde_json::to_value(job.view())).ok_or_else(not_found)?;
    let body = body.map_err(|e| ApiError(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?;
    Ok(Json(body).into_response())
}

#[derive(Debug, Deserialize)]
pub struct ArtifactQuery {
    kind: Option<String>,
}

async fn get_artifact(
    State(state): State<AppState>,
    Path(id): Path<String>,
    Query(q): Query<ArtifactQuery>,
) -> Result<Response, ApiError> {
    let found = state.store.with(&id, |job| {
        let kind = q.kind.as_deref().unwrap_or("result");
        let Some(kind) = ArtifactKind::parse(kind) else {
            return Err(ApiError::bad_request(format!("unknown artifact kind {kind}")));
        };
        match (&job.artifacts, job.status) {
            (Some(a), s) if s.is_success() => Ok(a.get(kind).to_vec()),
            (_, JobStatus::Failed) => Err(ApiError(StatusCode::CONFLICT, "job failed".into())),
            _ => Err(ApiError(StatusCode::CONFLICT, "job not finished".into())),
        }
    });
    let bytes = found.ok_or_else(not_found)??;
    Ok(([(header::CONTENT_TYPE, "image/png")], bytes).into_response())
}

/// Saliency map of the uploaded image, computed at most
/// `PREVIEW_MAX_WIDTH` wide. Accepts a multipart `image` field or a raw PNG body.
async fn preview_saliency(State(state): State<AppState>, req: Request) -> Result<Response, ApiError> {
    let is_multipart = req
        .headers()
        .get(header::CONTENT_TYPE)
        .and_then(|v| v.to_str().ok())
        .is_some_and(|v| v.starts_with("multipart/form-data"));
    let bytes = if is_multipart {
        let mp = Multipart::from_request(req, &()).await.map_err(|e| ApiError::bad_request(e.body_text()))?;
        read_multipart(mp).await?.image.ok_or_else(|| ApiError::bad_request("missing image"))?
    } else {
        axum::body::to_bytes(req.into_body(), MAX_UPLOAD_BYTES)
            .await
            .map_err(|e| ApiError::bad_request(e.to_string()))?
            .to_vec()
    };
    let sal = state.base_config.sal;
    let png = tokio::task::spawn_blocking(move || -> Result<Vec<u8>, ApiError> {
        let img = io::decode_rgb_png(&bytes).map_err(|e| ApiError::bad_request(format!("invalid image: {e}")))?;
        let mut lab = rgb_to_lab(&img);
        let (w, h) = lab.dimensions();
        if w > PREVIEW_MAX_WIDTH {
            let nh = ((h as f64 * PREVIEW_MAX_WIDTH as f64 / w as f64).round() as usize).max(1);
            lab = resample_to(&lab, PREVIEW_MAX_WIDTH, nh);
        }
        let s = compute_saliency(&lab, &sal).map_err(|e| ApiError::bad_request(e.to_string()))?;
        io::encode_gray_png(s.width(), s.height(), &s.to_gray8())
            .map_err(|e| ApiError(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))
    })
    .await
    .map_err(|e| ApiError(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))??;
    Ok(([(header::CONTENT_TYPE, "image/png")], png).into_response())
}
