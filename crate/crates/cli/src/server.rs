//! HTTP/JSON service over the analysis store.

use std::collections::HashMap;
use std::net::SocketAddr;
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use axum::body::Bytes;
use axum::extract::{DefaultBodyLimit, Path, Query, State};
use axum::http::{header, HeaderValue, Method, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post, put};
use axum::{Json, Router};
use serde::de::DeserializeOwned;
use serde::Deserialize;
use tokio::sync::{Mutex as AsyncMutex, OwnedMutexGuard};
use tower_http::cors::{AllowOrigin, Any, CorsLayer};

use crate::error::{AppError, AppResult};
use crate::store::Store;
use crate::workflow;
use scriptoria::config::Settings;
use scriptoria::document::Medium;
use scriptoria::features::{compare, NormalizationMode};
use scriptoria::layout::SoOverrides;
use scriptoria::matcher::{BBox, Embedder};

pub struct AppState {
    pub store: Store,
    pub settings: Settings,
    pub embedder: Embedder,
    locks: Mutex<HashMap<String, Arc<AsyncMutex<()>>>>,
}

impl AppState {
    pub fn new(store: Store, settings: Settings) -> AppResult<Self> {
        settings.validate()?;
        let embedder = Embedder::from_kind(&settings.matcher.embedder)?;
        Ok(Self {
            store,
            settings,
            embedder,
            locks: Mutex::new(HashMap::new()),
        })
    }

    /// Serializes mutations of one document; other documents are unaffected.
    async fn lock(&self, id: &str) -> OwnedMutexGuard<()> {
        let m = {
            let mut locks = self.locks.lock().expect("lock table poisoned");
            locks.entry(id.to_string()).or_default().clone()
        };
        m.lock_owned().await
    }
}

impl IntoResponse for AppError {
    fn into_response(self) -> Response {
        let status = StatusCode::from_u16(self.status()).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        if status.is_server_error() {
            log::error!("{self}");
        }
        let body = serde_json::json!({ "code": self.code(), "message": self.to_string() });
        (status, Json(body)).into_response()
    }
}

/// Runs filesystem and compute work off the async workers.
async fn blocking<T, F>(f: F) -> AppResult<T>
where
    T: Send + 'static,
    F: FnOnce() -> AppResult<T> + Send + 'static,
{
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| AppError::Internal(e.to_string()))?
}

fn parse<T: DeserializeOwned>(body: &[u8]) -> AppResult<T> {
    Ok(serde_json::from_slice(body)?)
}

fn parse_mode(q: &HashMap<String, String>, default: NormalizationMode) -> AppResult<NormalizationMode> {
    match q.get("mode") {
        Some(m) => Ok(m.parse()?),
        None => Ok(default),
    }
}

type Shared = State<Arc<AppState>>;

async fn upload(
    State(st): Shared,
    Query(q): Query<HashMap<String, String>>,
    body: Bytes,
) -> AppResult<impl IntoResponse> {
    let medium = match q.get("medium").map(String::as_str) {
        None | Some("paper-scan") => Medium::PaperScan,
        Some("tablet") => Medium::Tablet,
        Some(other) => return Err(AppError::BadRequest(format!("unknown medium {other:?}"))),
    };
    let _guard = st.lock(&workflow::content_id(&body)).await;
    let record = blocking(move || workflow::upload(&st.store, &body, medium, &st.settings)).await?;
    Ok((StatusCode::CREATED, Json(record)))
}

async fn get_record(State(st): Shared, Path(id): Path<String>) -> AppResult<impl IntoResponse> {
    let folder = st.store.document(&id)?;
    let record: scriptoria::document::DocumentRecord =
        blocking(move || folder.read_json(workflow::RECORD)).await?;
    Ok(Json(record))
}

async fn get_image(State(st): Shared, Path(id): Path<String>) -> AppResult<impl IntoResponse> {
    let folder = st.store.document(&id)?;
    let bytes = blocking(move || folder.read_bytes(workflow::BINARY)).await?;
    Ok(([(header::CONTENT_TYPE, "image/png")], bytes))
}

async fn get_layout(State(st): Shared, Path(id): Path<String>) -> AppResult<impl IntoResponse> {
    let folder = st.store.document(&id)?;
    Ok(Json(blocking(move || workflow::load_layout(&folder)).await?))
}

async fn get_session(State(st): Shared, Path(id): Path<String>) -> AppResult<impl IntoResponse> {
    let folder = st.store.document(&id)?;
    Ok(Json(blocking(move || workflow::load_session(&folder)).await?))
}

async fn put_so(
    State(st): Shared,
    Path(id): Path<String>,
    body: Bytes,
) -> AppResult<impl IntoResponse> {
    let folder = st.store.document(&id)?;
    let so: SoOverrides = parse(&body)?;
    let _guard = st.lock(&id).await;
    Ok(Json(blocking(move || workflow::set_so(&folder, so)).await?))
}

#[derive(Deserialize)]
struct TemplateRequest {
    bbox: BBox,
    label: String,
}

async fn post_template(
    State(st): Shared,
    Path(id): Path<String>,
    body: Bytes,
) -> AppResult<impl IntoResponse> {
    let folder = st.store.document(&id)?;
    let req: TemplateRequest = parse(&body)?;
    let _guard = st.lock(&id).await;
    let t = blocking(move || workflow::add_template(&folder, req.bbox, &req.label)).await?;
    Ok((StatusCode::CREATED, Json(t)))
}

#[derive(Deserialize)]
struct SearchRequest {
    template_id: String,
    /// Document owning the template; defaults to the searched document.
    #[serde(default)]
    template_doc: Option<String>,
    #[serde(default)]
    t_c: Option<f64>,
    #[serde(default)]
    budget_ms: Option<u64>,
}

async fn post_search(
    State(st): Shared,
    Path(id): Path<String>,
    body: Bytes,
) -> AppResult<impl IntoResponse> {
    let folder = st.store.document(&id)?;
    let req: SearchRequest = parse(&body)?;
    let template_folder = st.store.document(req.template_doc.as_deref().unwrap_or(&id))?;
    let budget = Duration::from_millis(req.budget_ms.unwrap_or(st.settings.search_budget_ms));
    let _guard = st.lock(&id).await;
    let deadline = Instant::now() + budget;
    let record = blocking(move || {
        let template = workflow::load_template(&template_folder, &req.template_id)?;
        workflow::search(
            &folder,
            &template,
            &req.template_id,
            req.t_c,
            &st.settings,
            &st.embedder,
            Some(deadline),
        )
    })
    .await?;
    Ok(Json(record))
}

async fn get_features(
    State(st): Shared,
    Path(id): Path<String>,
    Query(q): Query<HashMap<String, String>>,
) -> AppResult<impl IntoResponse> {
    let folder = st.store.document(&id)?;
    let mode = parse_mode(&q, st.settings.mode)?;
    let _guard = st.lock(&id).await;
    Ok(Json(blocking(move || workflow::features(&folder, mode)).await?))
}

#[derive(Deserialize)]
struct CompareRequest {
    a: String,
    b: String,
    #[serde(default)]
    threshold: Option<f64>,
    #[serde(default)]
    mode: Option<NormalizationMode>,
}

async fn post_compare(State(st): Shared, body: Bytes) -> AppResult<impl IntoResponse> {
    let req: CompareRequest = parse(&body)?;
    let fa = st.store.document(&req.a)?;
    let fb = st.store.document(&req.b)?;
    let threshold = req.threshold.unwrap_or(st.settings.threshold);
    if !(threshold > 0.0) || !threshold.is_finite() {
        return Err(AppError::BadRequest(format!("threshold must be positive, got {threshold}")));
    }
    let mode = req.mode.unwrap_or(st.settings.mode);
    // fixed lock order so two opposite compares cannot deadlock
    let (first, second) = if req.a <= req.b { (&req.a, &req.b) } else { (&req.b, &req.a) };
    let _g1 = st.lock(first).await;
    let _g2 = if first != second { Some(st.lock(second).await) } else { None };
    let result = blocking(move || {
        let va = workflow::features(&fa, mode)?;
        let vb = workflow::features(&fb, mode)?;
        Ok(compare(&va, &vb, threshold)?)
    })
    .await?;
    Ok(Json(result))
}

async fn health() -> impl IntoResponse {
    Json(serde_json::json!({ "status": "ok" }))
}

async fn fallback() -> AppError {
    AppError::NotFound("route".into())
}

pub fn router(state: Arc<AppState>) -> Router {
    let cors = state.settings.cors_origin.as_deref().and_then(|origin| {
        let value = HeaderValue::from_str(origin).ok()?;
        Some(
            CorsLayer::new()
                .allow_origin(AllowOrigin::list([value]))
                .allow_methods([Method::GET, Method::POST, Method::PUT])
                .allow_headers(Any),
        )
    });
    let router = Router::new()
        .route("/health", get(health))
        .route("/documents", post(upload))
        .route("/documents/{id}", get(get_record))
        .route("/documents/{id}/image", get(get_image))
        .route("/documents/{id}/layout", get(get_layout))
        .route("/documents/{id}/session", get(get_session))
        .route("/documents/{id}/so", put(put_so))
        .route("/documents/{id}/templates", post(post_template))
        .route("/documents/{id}/search", post(post_search))
        .route("/documents/{id}/features", get(get_features))
        .route("/compare", post(post_compare))
        .fallback(fallback)
        .layer(DefaultBodyLimit::max(64 * 1024 * 1024))
        .with_state(state);
    match cors {
        Some(c) => router.layer(c),
        None => router,
    }
}

pub async fn serve(state: Arc<AppState>, addr: SocketAddr) -> AppResult<()> {
    let listener = tokio::net::TcpListener::bind(addr)
        .await
        .map_err(|e| scriptoria::Error::io(addr.to_string(), e))?;
    log::info!("listening on {addr}, store at {}", state.store.root().display());
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
        .map_err(|e| AppError::Internal(e.to_string()))
}
