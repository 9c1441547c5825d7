//! HTTP+JSON access to analysed cases: reports, RFC curves, heat maps, frames, co-registration
//! and stent simulation against immutable per-case snapshots.

mod store;

use std::net::SocketAddr;
use std::path::{Component, Path as FsPath, PathBuf};
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{DefaultBodyLimit, FromRequest, Multipart, Path, Request, State};
use axum::http::{header, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Deserialize;
use serde_json::{json, Value};
use thiserror::Error;

use qfr_core::cases::{analyze_case, load_case, params_for_case, CaseError, PipelineError};
use qfr_core::stenting::{simulate_stent, StentError};
use qfr_core::{Options, Params, Plan};

pub use store::{Session, SessionStore};

const MAX_UPLOAD_BYTES: usize = 512 * 1024 * 1024;

#[derive(Debug, Error)]
pub enum ApiError {
    #[error("unknown session '{0}'")]
    UnknownSession(String),
    #[error("frame {0} does not exist")]
    UnknownFrame(String),
    #[error("{0}")]
    BadRequest(String),
    #[error("invalid plan: {0}")]
    InvalidPlan(#[from] StentError),
    #[error(transparent)]
    Case(#[from] CaseError),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error("internal error: {0}")]
    Internal(String),
}

impl ApiError {
    fn status(&self) -> StatusCode {
        match self {
            ApiError::UnknownSession(_) | ApiError::UnknownFrame(_) => StatusCode::NOT_FOUND,
            ApiError::BadRequest(_) => StatusCode::BAD_REQUEST,
            ApiError::InvalidPlan(e) => match e {
                StentError::Rfc(_) | StentError::Hemo(_) => StatusCode::UNPROCESSABLE_ENTITY,
                _ => StatusCode::BAD_REQUEST,
            },
            ApiError::Case(_) | ApiError::Pipeline(_) => StatusCode::UNPROCESSABLE_ENTITY,
            ApiError::Internal(_) => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let mut body = json!({ "error": self.to_string() });
        match &self {
            ApiError::Case(CaseError::SchemaViolation { field, .. }) => {
                body["field"] = json!(field);
            }
            ApiError::Case(CaseError::AnisotropicSpacing { .. }) => {
                body["field"] = json!("spacing");
            }
            ApiError::Pipeline(e) => {
                body["cause"] = json!(e.cause.to_string());
                body["stage"] = json!(e.stage);
            }
            _ => {}
        }
        (self.status(), Json(body)).into_response()
    }
}

#[derive(Debug, Clone, Default)]
pub struct AppState {
    pub store: Arc<SessionStore>,
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/cases", post(open_case))
        .route("/cases/{s}/report", get(report))
        .route("/cases/{s}/rfc", get(rfc))
        .route("/cases/{s}/heatmap.png", get(heatmap))
        .route("/cases/{s}/frame/{file}", get(frame))
        .route("/cases/{s}/simulate", post(simulate))
        .route("/cases/{s}/coregistration", get(coregistration))
        .layer(DefaultBodyLimit::max(MAX_UPLOAD_BYTES))
        .with_state(state)
}

pub async fn serve(addr: SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(AppState::default())).await
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct OpenRequest {
    path: Option<PathBuf>,
    kappa: Option<f64>,
    pprox_mmhg: Option<f64>,
}

fn bundle_path(name: &str) -> Result<PathBuf, ApiError> {
    let p = PathBuf::from(name);
    let safe = !name.is_empty() && p.components().all(|c| matches!(c, Component::Normal(_)));
    if safe {
        Ok(p)
    } else {
        Err(ApiError::BadRequest(format!(
            "unsafe file name '{name}' in upload"
        )))
    }
}

fn parse_number(field: &str, text: &str) -> Result<f64, ApiError> {
    text.trim()
        .parse()
        .map_err(|_| ApiError::BadRequest(format!("'{field}' must be a number")))
}

/// Stores the uploaded parts under `dir`. Each file part is saved under its file name (or, when
/// absent, its field name), which may include the `frames/` prefix used by the bundle layout.
async fn receive_bundle(mut multipart: Multipart, dir: &FsPath) -> Result<OpenRequest, ApiError> {
    let mut request = OpenRequest::default();
    while let Some(field) = multipart
        .next_field()
        .await
        .map_err(|e| ApiError::BadRequest(e.to_string()))?
    {
        let name = field.name().unwrap_or_default().to_string();
        let file_name = field.file_name().map(str::to_string);
        let data = field
            .bytes()
            .await
            .map_err(|e| ApiError::BadRequest(e.to_string()))?;
        match (file_name, name.as_str()) {
            (None, "kappa") => {
                request.kappa = Some(parse_number("kappa", &String::from_utf8_lossy(&data))?)
            }
            (None, "pprox_mmhg") => {
                request.pprox_mmhg =
                    Some(parse_number("pprox_mmhg", &String::from_utf8_lossy(&data))?)
            }
            (file, field_name) => {
                let rel = bundle_path(file.as_deref().unwrap_or(field_name))?;
                let path = dir.join(rel);
                if let Some(parent) = path.parent() {
                    std::fs::create_dir_all(parent)
                        .map_err(|e| ApiError::Internal(e.to_string()))?;
                }
                std::fs::write(&path, &data).map_err(|e| ApiError::Internal(e.to_string()))?;
            }
        }
    }
    Ok(request)
}

async fn open_case(State(state): State<AppState>, req: Request) -> Result<Response, ApiError> {
    let is_multipart = req
        .headers()
        .get(header::CONTENT_TYPE)
        .and_then(|v| v.to_str().ok())
        .is_some_and(|v| v.starts_with("multipart/form-data"));
    let upload = tempfile::tempdir().map_err(|e| ApiError::Internal(e.to_string()))?;
    let (request, dir) = if is_multipart {
        let multipart = Multipart::from_request(req, &state)
            .await
            .map_err(|e| ApiError::BadRequest(e.to_string()))?;
        (
            receive_bundle(multipart, upload.path()).await?,
            upload.path().to_path_buf(),
        )
    } else {
        let body = Bytes::from_request(req, &state)
            .await
            .map_err(|e| ApiError::BadRequest(e.to_string()))?;
        let request: OpenRequest =
            serde_json::from_slice(&body).map_err(|e| ApiError::BadRequest(e.to_string()))?;
        let dir = request.path.clone().ok_or_else(|| {
            ApiError::BadRequest("expected a multipart bundle or {\"path\": ...}".into())
        })?;
        (request, dir)
    };

    let store = Arc::clone(&state.store);
    let session = tokio::task::spawn_blocking(move || -> Result<Arc<Session>, ApiError> {
        let case = load_case(&dir)?;
        let params: Params = params_for_case(&case, request.kappa, request.pprox_mmhg);
        let analysis = analyze_case(&case, &params, &Options::default())?;
        Ok(store.insert(case, analysis))
    })
    .await
    .map_err(|e| ApiError::Internal(e.to_string()))??;
    drop(upload);

    Ok(Json(json!({
        "session": session.id,
        "version": session.version,
        "report": session.analysis.report,
    }))
    .into_response())
}

fn session(state: &AppState, id: &str) -> Result<Arc<Session>, ApiError> {
    state
        .store
        .get(id)
        .ok_or_else(|| ApiError::UnknownSession(id.to_string()))
}

fn bytes_response(content_type: &'static str, body: Vec<u8>) -> Response {
    (
        [(header::CONTENT_TYPE, HeaderValue::from_static(content_type))],
        body,
    )
        .into_response()
}

async fn report(
    State(state): State<AppState>,
    Path(s): Path<String>,
) -> Result<Response, ApiError> {
    let session = session(&state, &s)?;
    Ok(bytes_response(
        "application/json",
        session.report_json.clone(),
    ))
}

async fn rfc(State(state): State<AppState>, Path(s): Path<String>) -> Result<Response, ApiError> {
    let session = session(&state, &s)?;
    Ok(bytes_response("application/json", session.rfc_json.clone()))
}

async fn coregistration(
    State(state): State<AppState>,
    Path(s): Path<String>,
) -> Result<Response, ApiError> {
    let session = session(&state, &s)?;
    Ok(bytes_response(
        "application/json",
        session.coregistration_json.clone(),
    ))
}

async fn heatmap(
    State(state): State<AppState>,
    Path(s): Path<String>,
) -> Result<Response, ApiError> {
    let session = session(&state, &s)?;
    Ok(bytes_response("image/png", session.heatmap_png.clone()))
}

async fn frame(
    State(state): State<AppState>,
    Path((s, file)): Path<(String, String)>,
) -> Result<Response, ApiError> {
    let session = session(&state, &s)?;
    let index: usize = file
        .strip_suffix(".png")
        .and_then(|i| i.parse().ok())
        .ok_or_else(|| ApiError::UnknownFrame(file.clone()))?;
    let png = store::frame_png(&session.case, index).ok_or(ApiError::UnknownFrame(file))?;
    Ok(bytes_response("image/png", png))
}

async fn simulate(
    State(state): State<AppState>,
    Path(s): Path<String>,
    body: Bytes,
) -> Result<Response, ApiError> {
    let session = session(&state, &s)?;
    let plan: Plan = serde_json::from_slice(&body)
        .map_err(|e| ApiError::BadRequest(format!("invalid plan: {e}")))?;
    let result =
        tokio::task::spawn_blocking(move || simulate_stent(&session.analysis.snapshot, &plan))
            .await
            .map_err(|e| ApiError::Internal(e.to_string()))??;
    let body: Value = json!(result);
    Ok(Json(body).into_response())
}
