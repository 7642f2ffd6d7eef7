//! Local JSON service over one loaded model.
//!
//! Every payload is produced by the same `ifm_core::reporting` functions
//! the CLI uses, so responses are byte-identical to `--format json`.

use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::Router;
use ifm_core::dsl::SourceModel;
use ifm_core::reporting::{
    build_report, build_whatif, export_json, model_document, to_json, ErrorDocument, ReportError,
    WhatIfRequest,
};
use serde::Deserialize;
use tokio::net::TcpListener;

#[derive(Clone)]
pub struct AppState {
    model: Arc<SourceModel>,
    max_paths: usize,
}

impl AppState {
    pub fn new(model: SourceModel, max_paths: usize) -> Self {
        AppState {
            model: Arc::new(model),
            max_paths,
        }
    }
}

fn json(status: StatusCode, body: Vec<u8>) -> Response {
    (status, [(header::CONTENT_TYPE, "application/json")], body).into_response()
}

fn error(status: StatusCode, message: impl Into<String>, diagnostics: Vec<String>) -> Response {
    json(status, to_json(&ErrorDocument::new(message, diagnostics)))
}

fn report_error(e: ReportError) -> Response {
    let status = match e {
        ReportError::UnknownConfiguration(_) | ReportError::UnknownOutcome(_) => {
            StatusCode::NOT_FOUND
        }
        _ => StatusCode::BAD_REQUEST,
    };
    error(status, e.to_string(), Vec::new())
}

async fn health() -> Response {
    json(StatusCode::OK, b"{\"status\":\"ok\"}".to_vec())
}

async fn model(State(st): State<AppState>) -> Response {
    json(StatusCode::OK, to_json(&model_document(&st.model)))
}

#[derive(Deserialize)]
struct AssessmentQuery {
    config: Option<String>,
}

async fn assessments(State(st): State<AppState>, Query(q): Query<AssessmentQuery>) -> Response {
    let config = q.config.as_deref().filter(|c| *c != "all");
    match build_report(&st.model, config, st.max_paths) {
        Ok(doc) => json(StatusCode::OK, export_json(&doc)),
        Err(e) => report_error(e),
    }
}

async fn whatif(State(st): State<AppState>, body: Bytes) -> Response {
    let req: WhatIfRequest = match serde_json::from_slice(&body) {
        Ok(r) => r,
        Err(e) => {
            return error(
                StatusCode::BAD_REQUEST,
                "malformed what-if body",
                vec![e.to_string()],
            )
        }
    };
    let edits = match req.parse() {
        Ok(e) => e,
        Err(diags) => return error(StatusCode::BAD_REQUEST, "invalid edits", diags),
    };
    let model = Arc::clone(&st.model);
    let max = st.max_paths;
    let result = tokio::task::spawn_blocking(move || build_whatif(&model, &edits, max)).await;
    match result {
        Ok(Ok(doc)) => json(StatusCode::OK, to_json(&doc)),
        Ok(Err(e)) => error(
            StatusCode::BAD_REQUEST,
            "what-if failed",
            vec![e.to_string()],
        ),
        Err(e) => error(StatusCode::INTERNAL_SERVER_ERROR, e.to_string(), Vec::new()),
    }
}

async fn not_found() -> Response {
    error(StatusCode::NOT_FOUND, "no such endpoint", Vec::new())
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/api/v1/health", get(health))
        .route("/api/v1/model", get(model))
        .route("/api/v1/assessments", get(assessments))
        .route("/api/v1/whatif", post(whatif))
        .fallback(not_found)
        .with_state(state)
}

/// Serves until the listener fails.
pub async fn serve(listener: TcpListener, state: AppState) -> std::io::Result<()> {
    axum::serve(listener, router(state)).await
}
