//! JSON/HTTP front of the engine.

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, State};
use axum::http::{header, StatusCode};
use axum::response::{Html, IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::json;
use tower_http::services::{ServeDir, ServeFile};

use crate::engine::{EngineError, EngineState, Mode, RoundView, SessionStore};
use crate::svg::render_product_svg;

pub struct Service {
    pub state: EngineState,
    pub store: SessionStore,
}

type Shared = Arc<Service>;

const FALLBACK_PAGE: &str = r#"<!doctype html>
<html><head><meta charset="utf-8"><title>mmdialog</title></head>
<body>
<h1>mmdialog browsing service</h1>
<p>No UI assets were found. Start the service with <code>--static-dir</code> pointing at a built UI, or use the JSON API directly:</p>
<ul>
<li><code>POST /api/session {"mode": "rules" | "agent" | "random"}</code></li>
<li><code>POST /api/session/{id}/query {"tokens": [...]}</code></li>
<li><code>POST /api/session/{id}/click {"product_id": "..."}</code></li>
<li><code>GET /api/session/{id}/history</code></li>
<li><code>GET /api/product/{id}/image.svg</code></li>
<li><code>GET /api/vocab</code></li>
</ul>
</body></html>
"#;

pub struct ApiError(StatusCode, String);

impl From<EngineError> for ApiError {
    fn from(e: EngineError) -> Self {
        let status = match &e {
            EngineError::NotFound(_) => StatusCode::NOT_FOUND,
            EngineError::BadRequest(_) => StatusCode::BAD_REQUEST,
            EngineError::Conflict(_) => StatusCode::CONFLICT,
            EngineError::Protocol(_) => StatusCode::UNPROCESSABLE_ENTITY,
            EngineError::Internal(_) => StatusCode::INTERNAL_SERVER_ERROR,
        };
        ApiError(status, e.to_string())
    }
}

impl From<JsonRejection> for ApiError {
    fn from(e: JsonRejection) -> Self {
        ApiError(StatusCode::BAD_REQUEST, e.body_text())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        if self.0.is_server_error() {
            log::error!("{}", self.1);
        }
        (self.0, Json(json!({ "error": self.1 }))).into_response()
    }
}

type ApiResult<T> = Result<Json<T>, ApiError>;

#[derive(Deserialize)]
struct CreateRequest {
    mode: Mode,
}

#[derive(Serialize)]
struct CreateResponse {
    session_id: String,
    mode: Mode,
    rounds: Vec<RoundView>,
}

#[derive(Deserialize)]
struct QueryRequest {
    tokens: Vec<String>,
}

#[derive(Deserialize)]
struct ClickRequest {
    product_id: String,
}

async fn create_session(
    State(svc): State<Shared>,
    body: Result<Json<CreateRequest>, JsonRejection>,
) -> ApiResult<CreateResponse> {
    let Json(req) = body?;
    let session_id = svc.store.create(&svc.state, req.mode)?;
    log::info!("session {session_id} created ({:?})", req.mode);
    Ok(Json(CreateResponse { session_id, mode: req.mode, rounds: Vec::new() }))
}

async fn post_query(
    State(svc): State<Shared>,
    Path(id): Path<String>,
    body: Result<Json<QueryRequest>, JsonRejection>,
) -> ApiResult<RoundView> {
    let Json(req) = body?;
    Ok(Json(svc.store.with_session(&id, |s| s.text_query(&svc.state, &req.tokens))?))
}

async fn post_click(
    State(svc): State<Shared>,
    Path(id): Path<String>,
    body: Result<Json<ClickRequest>, JsonRejection>,
) -> ApiResult<RoundView> {
    let Json(req) = body?;
    Ok(Json(svc.store.with_session(&id, |s| s.click(&svc.state, &req.product_id))?))
}

async fn history(State(svc): State<Shared>, Path(id): Path<String>) -> ApiResult<Vec<RoundView>> {
    Ok(Json(svc.store.with_session(&id, |s| Ok(s.rounds().to_vec()))?))
}

async fn product_image(State(svc): State<Shared>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let catalog = svc.state.catalog();
    let index = catalog
        .index_of(&id)
        .map_err(|_| EngineError::NotFound(format!("no product {id}")))?;
    let svg = render_product_svg(catalog.get(index), &svc.state.vocab);
    Ok((
        [
            (header::CONTENT_TYPE, "image/svg+xml"),
            (header::CACHE_CONTROL, "public, max-age=86400"),
        ],
        svg,
    )
        .into_response())
}

async fn vocab(State(svc): State<Shared>) -> Json<serde_json::Value> {
    let v = &svc.state.vocab;
    Json(json!({
        "tokens": v.tokens().collect::<Vec<_>>(),
        "vocabulary": v,
    }))
}

async fn fallback_page() -> Html<&'static str> {
    Html(FALLBACK_PAGE)
}

/// The API routes, plus static files from `static_dir` when it holds an
/// `index.html`.
pub fn router(service: Service, static_dir: Option<PathBuf>) -> Router {
    let api = Router::new()
        .route("/api/session", post(create_session))
        .route("/api/session/{id}/query", post(post_query))
        .route("/api/session/{id}/click", post(post_click))
        .route("/api/session/{id}/history", get(history))
        .route("/api/product/{id}/image.svg", get(product_image))
        .route("/api/vocab", get(vocab))
        .with_state(Arc::new(service));
    match static_dir.filter(|d| d.join("index.html").is_file()) {
        Some(dir) => {
            let index = dir.join("index.html");
            api.fallback_service(ServeDir::new(dir).fallback(ServeFile::new(index)))
        }
        None => api.route("/", get(fallback_page)),
    }
}

pub async fn serve(router: Router, addr: SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router).await
}
