//! JSON-over-HTTP service driving the staged pipeline on a project store.

use std::sync::Arc;
use std::time::{SystemTime, UNIX_EPOCH};

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::de::DeserializeOwned;
use serde::Deserialize;
use serde_json::json;

use forge_core::diffusion::{SampleConfig, TAG_VOCABULARY};
use forge_core::inpaint::KernelModel;
use forge_core::pipeline::{self, JobQueue, ModelHandle, ProjectStore, Stage, MAX_GUIDANCE};
use forge_core::Error;

use crate::opts::{ExtractOpts, InpaintOpts, ReconstructOpts};

#[derive(Clone)]
pub struct AppState {
    pub store: ProjectStore,
    pub model: Option<Arc<ModelHandle>>,
    pub kernel: Option<Arc<KernelModel>>,
    pub jobs: Arc<JobQueue>,
}

impl AppState {
    pub fn new(store: ProjectStore, model: Option<Arc<ModelHandle>>, kernel: Option<Arc<KernelModel>>) -> Self {
        Self { store, model, kernel, jobs: Arc::new(JobQueue::new()) }
    }
}

#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub message: String,
    pub field: Option<&'static str>,
}

impl ApiError {
    fn new(status: StatusCode, message: impl Into<String>) -> Self {
        Self { status, message: message.into(), field: None }
    }

    fn field(field: &'static str, message: impl Into<String>) -> Self {
        Self { status: StatusCode::UNPROCESSABLE_ENTITY, message: message.into(), field: Some(field) }
    }
}

/// HTTP status of a pipeline error.
pub fn status_of(e: &Error) -> StatusCode {
    match e {
        Error::NotFound(_) => StatusCode::NOT_FOUND,
        Error::Dependency(_) => StatusCode::CONFLICT,
        Error::InvalidArgument(_) | Error::ShapeMismatch { .. } | Error::ResolutionMismatch { .. } => {
            StatusCode::UNPROCESSABLE_ENTITY
        }
        Error::Stage { source, .. } => status_of(source),
        _ => StatusCode::INTERNAL_SERVER_ERROR,
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        Self::new(status_of(&e), e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let mut body = json!({ "error": self.message });
        if let Some(f) = self.field {
            body["field"] = json!(f);
        }
        (self.status, Json(body)).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

/// Parses a JSON body; an empty body reads as `{}`.
fn body<T: DeserializeOwned>(bytes: &Bytes) -> ApiResult<T> {
    let text: &[u8] = if bytes.iter().all(u8::is_ascii_whitespace) { b"{}" } else { bytes };
    serde_json::from_slice(text).map_err(|e| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, e.to_string()))
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> forge_core::Result<T> + Send + 'static) -> ApiResult<T> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?
        .map_err(ApiError::from)
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/api/projects", post(create_project))
        .route("/api/projects/{id}", get(get_project))
        .route("/api/projects/{id}/photo", post(upload_photo))
        .route("/api/projects/{id}/extract", post(extract))
        .route("/api/projects/{id}/mask", axum::routing::put(upload_mask))
        .route("/api/projects/{id}/inpaint", post(inpaint))
        .route("/api/projects/{id}/generate", post(generate))
        .route("/api/projects/{id}/runs/{run}/variants/{k}/reconstruct", post(reconstruct))
        .route("/api/jobs/{job_id}", get(job_status))
        .route("/api/artifacts/{artifact_id}", get(artifact))
        .with_state(state)
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CreateProject {
    name: Option<String>,
}

async fn create_project(State(s): State<AppState>, bytes: Bytes) -> ApiResult<Response> {
    let req: CreateProject = body(&bytes)?;
    let name = req.name.ok_or_else(|| ApiError::field("name", "name is required"))?;
    let id = uuid::Uuid::new_v4().simple().to_string();
    let created_at = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    let store = s.store.clone();
    let p = blocking(move || store.create(&id, &name, created_at)).await?;
    Ok((StatusCode::CREATED, Json(json!({ "id": p.id }))).into_response())
}

async fn get_project(State(s): State<AppState>, Path(id): Path<String>) -> ApiResult<Response> {
    let p = blocking(move || s.store.load(&id)).await?;
    Ok(Json(p).into_response())
}

async fn upload_photo(State(s): State<AppState>, Path(id): Path<String>, bytes: Bytes) -> ApiResult<Response> {
    let a = blocking(move || pipeline::set_photo(&s.store, &id, &bytes)).await?;
    Ok(Json(a).into_response())
}

async fn extract(State(s): State<AppState>, Path(id): Path<String>, bytes: Bytes) -> ApiResult<Response> {
    let cfg = body::<ExtractOpts>(&bytes)?.resolve()?;
    let a = blocking(move || pipeline::extract(&s.store, &id, &cfg)).await?;
    Ok(Json(a).into_response())
}

async fn upload_mask(State(s): State<AppState>, Path(id): Path<String>, bytes: Bytes) -> ApiResult<Response> {
    let a = blocking(move || pipeline::set_mask(&s.store, &id, &bytes)).await?;
    Ok(Json(a).into_response())
}

async fn inpaint(State(s): State<AppState>, Path(id): Path<String>, bytes: Bytes) -> ApiResult<Response> {
    let cfg = body::<InpaintOpts>(&bytes)?.resolve()?;
    let a = blocking(move || pipeline::inpaint(&s.store, &id, &cfg, s.kernel.as_deref())).await?;
    Ok(Json(a).into_response())
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenerateRequest {
    pub tag_id: Option<usize>,
    pub n_samples: Option<usize>,
    pub guidance_scale: Option<f32>,
    pub seed: Option<u64>,
}

impl GenerateRequest {
    /// The sampling config, or the first offending field.
    pub fn resolve(&self) -> ApiResult<SampleConfig> {
        let d = SampleConfig::default();
        let cfg = SampleConfig {
            n_samples: self.n_samples.unwrap_or(d.n_samples),
            guidance_scale: self.guidance_scale.unwrap_or(d.guidance_scale),
            seed: self.seed.unwrap_or(d.seed),
            tag_id: self.tag_id.unwrap_or(d.tag_id),
        };
        if cfg.tag_id >= TAG_VOCABULARY.len() {
            return Err(ApiError::field(
                "tag_id",
                format!("tag_id {} outside vocabulary 0..{}", cfg.tag_id, TAG_VOCABULARY.len()),
            ));
        }
        if !(0.0..=MAX_GUIDANCE).contains(&cfg.guidance_scale) {
            return Err(ApiError::field(
                "guidance_scale",
                format!("guidance_scale {} outside [0, {MAX_GUIDANCE}]", cfg.guidance_scale),
            ));
        }
        if cfg.n_samples == 0 {
            return Err(ApiError::field("n_samples", "n_samples must be >= 1"));
        }
        pipeline::check_sample_config(&cfg)?;
        Ok(cfg)
    }
}

async fn generate(State(s): State<AppState>, Path(id): Path<String>, bytes: Bytes) -> ApiResult<Response> {
    let store = s.store.clone();
    let pid = id.clone();
    let project = blocking(move || store.load(&pid)).await?;
    let cfg = body::<GenerateRequest>(&bytes)?.resolve()?;
    project.require(Stage::Generate)?;
    let model = s.model.clone().ok_or_else(|| ApiError::new(StatusCode::SERVICE_UNAVAILABLE, "no model is loaded"))?;
    let store = s.store.clone();
    let project_id = id.clone();
    let job_id = s.jobs.submit(&id, "generate", move |progress| {
        pipeline::generate(&store, &project_id, &model, &cfg, |done, total| progress.report(done, total))
            .map(|run| json!({ "run": run }))
            .map_err(|e| e.to_string())
    });
    Ok((StatusCode::ACCEPTED, Json(json!({ "job_id": job_id }))).into_response())
}

async fn reconstruct(
    State(s): State<AppState>,
    Path((id, run, k)): Path<(String, usize, usize)>,
    bytes: Bytes,
) -> ApiResult<Response> {
    let cfg = body::<ReconstructOpts>(&bytes)?.resolve()?;
    let a = blocking(move || pipeline::reconstruct(&s.store, &id, run, k, &cfg)).await?;
    Ok(Json(a).into_response())
}

async fn job_status(State(s): State<AppState>, Path(job_id): Path<String>) -> ApiResult<Response> {
    let status = job_id
        .parse::<u64>()
        .ok()
        .and_then(|id| s.jobs.status(id))
        .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, format!("job {job_id} not found")))?;
    Ok(Json(status).into_response())
}

async fn artifact(State(s): State<AppState>, Path(artifact_id): Path<String>) -> ApiResult<Response> {
    if artifact_id.len() != 64 || !artifact_id.bytes().all(|b| b.is_ascii_hexdigit()) {
        return Err(ApiError::new(StatusCode::NOT_FOUND, format!("artifact {artifact_id} not found")));
    }
    let (_, a, bytes) = blocking(move || s.store.find_artifact(&artifact_id)).await?;
    Ok(([(header::CONTENT_TYPE, a.media_type)], bytes).into_response())
}
