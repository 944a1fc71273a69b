//! HTTP screening service.
//!
//! `POST /screen` takes a PNG or JPEG body, `GET /healthz` reports the
//! loaded model version and `POST /reload` re-reads the model file and
//! swaps it in. Requests hold an `Arc` to the model they started with, so a
//! reload never changes a request mid-flight.

use std::path::PathBuf;
use std::sync::{Arc, RwLock};

use axum::body::Bytes;
use axum::extract::{DefaultBodyLimit, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use handscreen_core::Backbone;
use serde_json::json;

use crate::artifact::{load_model, ModelArtifact};
use crate::screening::{check_pairing, run_screening, ScreeningError};

const MAX_BODY: usize = 32 * 1024 * 1024;

pub struct AppState {
    backbone: Arc<dyn Backbone>,
    model: RwLock<Option<Arc<ModelArtifact>>>,
    model_path: Option<PathBuf>,
    strict: bool,
}

impl AppState {
    pub fn new(backbone: Arc<dyn Backbone>, model: Option<ModelArtifact>, model_path: Option<PathBuf>, strict: bool) -> Self {
        Self { backbone, model: RwLock::new(model.map(Arc::new)), model_path, strict }
    }

    pub fn current(&self) -> Option<Arc<ModelArtifact>> {
        self.model.read().expect("model lock poisoned").clone()
    }

    pub fn swap(&self, model: ModelArtifact) -> Option<Arc<ModelArtifact>> {
        self.model.write().expect("model lock poisoned").replace(Arc::new(model))
    }

    /// Loads the configured model file and installs it; the previous model
    /// stays in place on any failure.
    pub fn reload(&self) -> Result<String, String> {
        let path = self.model_path.as_ref().ok_or("service was started without a model path")?;
        let model = load_model(path).map_err(|e| format!("{}: {e}", path.display()))?;
        check_pairing(self.backbone.as_ref(), &model, self.strict).map_err(|e| e.to_string())?;
        let version = model.version.clone();
        self.swap(model);
        log::info!("loaded model {version} from {}", path.display());
        Ok(version)
    }
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/screen", post(screen))
        .route("/healthz", get(healthz))
        .route("/reload", post(reload))
        .layer(DefaultBodyLimit::max(MAX_BODY))
        .with_state(state)
}

pub async fn serve(listener: tokio::net::TcpListener, state: Arc<AppState>) -> std::io::Result<()> {
    axum::serve(listener, router(state)).await
}

fn error(status: StatusCode, message: impl Into<String>) -> Response {
    (status, Json(json!({ "error": message.into() }))).into_response()
}

async fn screen(State(state): State<Arc<AppState>>, headers: HeaderMap, body: Bytes) -> Response {
    if let Some(ct) = headers.get(header::CONTENT_TYPE) {
        let ct = ct.to_str().unwrap_or("").split(';').next().unwrap_or("").trim().to_ascii_lowercase();
        if !matches!(ct.as_str(), "image/png" | "image/jpeg" | "application/octet-stream") {
            return error(StatusCode::UNSUPPORTED_MEDIA_TYPE, format!("unsupported content type {ct:?}"));
        }
    }
    let Some(model) = state.current() else {
        return error(StatusCode::SERVICE_UNAVAILABLE, "no model loaded");
    };
    let backbone = state.backbone.clone();
    let strict = state.strict;
    let outcome = tokio::task::spawn_blocking(move || run_screening(&body, backbone.as_ref(), &model, strict)).await;
    match outcome {
        Ok(Ok(result)) => Json(result).into_response(),
        Ok(Err(e @ ScreeningError::Decode(_))) => error(StatusCode::BAD_REQUEST, e.to_string()),
        Ok(Err(e @ (ScreeningError::BackboneMismatch { .. } | ScreeningError::Normalization(_)))) => {
            error(StatusCode::CONFLICT, e.to_string())
        }
        Ok(Err(e)) => error(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()),
        Err(join) => error(StatusCode::INTERNAL_SERVER_ERROR, format!("screening task failed: {join}")),
    }
}

async fn healthz(State(state): State<Arc<AppState>>) -> Response {
    let model_version = state.current().map(|m| m.version.clone());
    Json(json!({
        "status": "ok",
        "model_version": model_version,
        "backbone_version": state.backbone.model_version(),
    }))
    .into_response()
}

async fn reload(State(state): State<Arc<AppState>>) -> Response {
    let outcome = tokio::task::spawn_blocking(move || state.reload()).await;
    match outcome {
        Ok(Ok(version)) => Json(json!({ "model_version": version })).into_response(),
        Ok(Err(message)) => error(StatusCode::UNPROCESSABLE_ENTITY, message),
        Err(join) => error(StatusCode::INTERNAL_SERVER_ERROR, format!("reload task failed: {join}")),
    }
}
