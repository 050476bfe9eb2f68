//! Read-only HTTP surface over one shared engine.

use std::sync::{Arc, OnceLock};

use axum::body::Bytes;
use axum::extract::State;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use mpve_core::{Engine, Error};
use serde::Deserialize;
use serde_json::json;

use crate::commands::hits;

/// Filled once the index has loaded; requests before that get 503.
#[derive(Clone, Default)]
pub struct AppState {
    engine: Arc<OnceLock<Arc<Engine>>>,
}

impl AppState {
    pub fn set(&self, engine: Engine) {
        let _ = self.engine.set(Arc::new(engine));
    }

    fn ready(&self) -> Result<Arc<Engine>, Response> {
        self.engine.get().cloned().ok_or_else(|| {
            (StatusCode::SERVICE_UNAVAILABLE, Json(json!({"status": "loading"}))).into_response()
        })
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SearchRequest {
    prompt: String,
    #[serde(default)]
    top_k: Option<usize>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct VectorizeRequest {
    text: String,
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/search", post(search))
        .route("/vectorize", post(vectorize))
        .with_state(state)
}

fn error(status: StatusCode, msg: impl std::fmt::Display) -> Response {
    (status, Json(json!({"error": msg.to_string()}))).into_response()
}

fn core_error(e: Error) -> Response {
    let status = match e {
        Error::ProviderUnreachable(_) | Error::ProviderProtocol(_) => StatusCode::BAD_GATEWAY,
        Error::EmptyText | Error::InvalidInput(_) | Error::InvalidConfig(_) => StatusCode::BAD_REQUEST,
        _ => StatusCode::INTERNAL_SERVER_ERROR,
    };
    error(status, e)
}

// Bodies are decoded by hand so every malformed payload is a 400, whatever
// the content type.
fn body<T: for<'de> Deserialize<'de>>(bytes: &Bytes) -> Result<T, Response> {
    serde_json::from_slice(bytes).map_err(|e| error(StatusCode::BAD_REQUEST, format!("malformed JSON: {e}")))
}

async fn health(State(state): State<AppState>) -> Response {
    match state.ready() {
        Ok(engine) => Json(json!({
            "status": "ok",
            "entries": engine.index().len(),
            "dim": engine.index().dim(),
        }))
        .into_response(),
        Err(r) => r,
    }
}

async fn search(State(state): State<AppState>, bytes: Bytes) -> Response {
    let engine = match state.ready() {
        Ok(e) => e,
        Err(r) => return r,
    };
    let req: SearchRequest = match body(&bytes) {
        Ok(r) => r,
        Err(r) => return r,
    };
    let result = tokio::task::spawn_blocking(move || {
        engine.search(&req.prompt, req.top_k).map(|m| hits(&engine, m))
    })
    .await;
    match result {
        Ok(Ok(found)) => Json(found).into_response(),
        Ok(Err(e)) => core_error(e),
        Err(e) => error(StatusCode::INTERNAL_SERVER_ERROR, e),
    }
}

async fn vectorize(State(state): State<AppState>, bytes: Bytes) -> Response {
    let engine = match state.ready() {
        Ok(e) => e,
        Err(r) => return r,
    };
    let req: VectorizeRequest = match body(&bytes) {
        Ok(r) => r,
        Err(r) => return r,
    };
    match tokio::task::spawn_blocking(move || engine.vectorize(&req.text)).await {
        Ok(Ok(semantics)) => Json(semantics).into_response(),
        Ok(Err(e)) => core_error(e),
        Err(e) => error(StatusCode::INTERNAL_SERVER_ERROR, e),
    }
}
