//! HTTP surface of the object store.
//!
//! ```text
//! PUT  /bucket/{bucket}                      create bucket (bearer)
//! GET  /bucket/{bucket}/{key}?versionId=     object bytes (bearer or GET grant)
//! POST /bucket/{bucket}/{key}                append version (bearer or POST grant)
//! PUT  /bucket/{bucket}/{key}                append version (bearer)
//! GET  /bucket/{bucket}/{key}/versions       version listing (bearer or GET grant on key)
//! POST /viewer/upload?key=                   append to the viewer bucket
//! GET  /viewer/download?key=&versionId=      read from the viewer bucket
//! ```
//!
//! Grants travel as `X-Expires` and `X-Sig` query parameters; direct access
//! uses `Authorization: Bearer <STORE_SECRET>`.

use std::collections::HashMap;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{DefaultBodyLimit, Path, RawQuery, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post, put};
use axum::{Json, Router};
use serde_json::json;
use tokio::net::TcpListener;
use tokio::sync::oneshot;
use tokio::task::JoinHandle;

use super::sign::{self, Grant, GrantError, Method};
use super::{ObjectStore, StoreError};

pub const MAX_OBJECT_BYTES: usize = 64 * 1024 * 1024;
pub const VIEWER_BUCKET: &str = "models";

#[derive(Debug, Clone)]
pub struct StoreConfig {
    pub root: PathBuf,
    pub secret: String,
    pub addr: SocketAddr,
    /// Buckets created at startup.
    pub buckets: Vec<String>,
    pub quota_bytes: Option<u64>,
}

impl StoreConfig {
    pub fn new(root: impl Into<PathBuf>, secret: impl Into<String>) -> Self {
        Self {
            root: root.into(),
            secret: secret.into(),
            addr: SocketAddr::from(([127, 0, 0, 1], 0)),
            buckets: vec![VIEWER_BUCKET.to_string()],
            quota_bytes: None,
        }
    }

    /// Reads STORE_ROOT, STORE_SECRET and STORE_PORT.
    pub fn from_env() -> Result<Self, String> {
        let secret = std::env::var("STORE_SECRET").map_err(|_| "STORE_SECRET must be set".to_string())?;
        if secret.is_empty() {
            return Err("STORE_SECRET must not be empty".into());
        }
        let root = std::env::var("STORE_ROOT").unwrap_or_else(|_| "./data/store".into());
        let port: u16 = std::env::var("STORE_PORT")
            .unwrap_or_else(|_| "9100".into())
            .parse()
            .map_err(|e| format!("STORE_PORT: {e}"))?;
        let mut c = Self::new(root, secret);
        c.addr = SocketAddr::from(([0, 0, 0, 0], port));
        Ok(c)
    }
}

struct AppState {
    store: ObjectStore,
    secret: Vec<u8>,
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    message: String,
}

impl ApiError {
    fn new(status: StatusCode, message: impl Into<String>) -> Self {
        Self { status, message: message.into() }
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        let status = match &e {
            StoreError::UnknownBucket(_) | StoreError::NotFound { .. } | StoreError::VersionNotFound { .. } => {
                StatusCode::NOT_FOUND
            }
            StoreError::InvalidBucket(_) | StoreError::InvalidKey { .. } | StoreError::EmptyBody => {
                StatusCode::BAD_REQUEST
            }
            StoreError::StorageFull { .. } => StatusCode::INSUFFICIENT_STORAGE,
            StoreError::Corrupt(_) | StoreError::Io(_) => StatusCode::INTERNAL_SERVER_ERROR,
        };
        Self::new(status, e.to_string())
    }
}

impl From<GrantError> for ApiError {
    fn from(e: GrantError) -> Self {
        let status = match e {
            GrantError::TtlOutOfRange(_) => StatusCode::BAD_REQUEST,
            GrantError::Expired | GrantError::BadSignature => StatusCode::FORBIDDEN,
        };
        Self::new(status, e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(json!({ "error": self.message }))).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

fn parse_query(raw: Option<&str>, allowed: &[&str]) -> ApiResult<HashMap<String, String>> {
    let mut out = HashMap::new();
    for (k, v) in url::form_urlencoded::parse(raw.unwrap_or("").as_bytes()) {
        if !allowed.contains(&k.as_ref()) {
            return Err(ApiError::new(StatusCode::BAD_REQUEST, format!("unknown query parameter {k:?}")));
        }
        if out.insert(k.clone().into_owned(), v.into_owned()).is_some() {
            return Err(ApiError::new(StatusCode::BAD_REQUEST, format!("repeated query parameter {k:?}")));
        }
    }
    Ok(out)
}

fn bearer_ok(headers: &HeaderMap, secret: &[u8]) -> bool {
    let Some(value) = headers.get(header::AUTHORIZATION).and_then(|v| v.to_str().ok()) else { return false };
    let Some(token) = value.strip_prefix("Bearer ") else { return false };
    // Compare digests so the comparison time does not depend on the prefix match.
    use sha2::{Digest, Sha256};
    Sha256::digest(token.as_bytes()) == Sha256::digest(secret)
}

/// Accepts either a valid grant in the query or the bearer secret.
fn authorize(
    state: &AppState,
    headers: &HeaderMap,
    query: &HashMap<String, String>,
    method: Method,
    bucket: &str,
    key: &str,
) -> ApiResult<()> {
    if let Some(sig) = query.get(sign::SIGNATURE_PARAM) {
        let expires_at = query
            .get(sign::EXPIRES_PARAM)
            .and_then(|e| e.parse::<u64>().ok())
            .ok_or_else(|| ApiError::from(GrantError::BadSignature))?;
        let grant = Grant {
            method,
            bucket: bucket.to_string(),
            key: key.to_string(),
            version_id: query.get(sign::VERSION_PARAM).cloned(),
            expires_at,
        };
        grant.verify(&state.secret, sig, sign::unix_now())?;
        return Ok(());
    }
    if query.contains_key(sign::EXPIRES_PARAM) {
        return Err(GrantError::BadSignature.into());
    }
    if bearer_ok(headers, &state.secret) {
        Ok(())
    } else {
        Err(ApiError::new(StatusCode::UNAUTHORIZED, "missing grant or bearer credentials"))
    }
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> Result<T, StoreError> + Send + 'static) -> ApiResult<T> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?
        .map_err(ApiError::from)
}

fn octets(bytes: Vec<u8>, version_id: &str) -> Response {
    (
        [
            (header::CONTENT_TYPE, "application/octet-stream".to_string()),
            (header::HeaderName::from_static("x-version-id"), version_id.to_string()),
        ],
        bytes,
    )
        .into_response()
}

async fn create_bucket(
    State(state): State<Arc<AppState>>,
    headers: HeaderMap,
    Path(bucket): Path<String>,
) -> ApiResult<StatusCode> {
    if !bearer_ok(&headers, &state.secret) {
        return Err(ApiError::new(StatusCode::UNAUTHORIZED, "bucket creation requires bearer credentials"));
    }
    let existed = state.store.has_bucket(&bucket);
    state.store.create_bucket(&bucket)?;
    Ok(if existed { StatusCode::OK } else { StatusCode::CREATED })
}

async fn get_object(
    State(state): State<Arc<AppState>>,
    headers: HeaderMap,
    Path((bucket, key)): Path<(String, String)>,
    RawQuery(raw): RawQuery,
) -> ApiResult<Response> {
    let query = parse_query(raw.as_deref(), &[sign::VERSION_PARAM, sign::EXPIRES_PARAM, sign::SIGNATURE_PARAM])?;
    if let Some(base) = key.strip_suffix("/versions") {
        authorize(&state, &headers, &query, Method::Get, &bucket, base)?;
        let base = base.to_string();
        let st = state.clone();
        let versions = blocking(move || st.store.list_versions(&bucket, &base)).await?;
        return Ok(Json(versions).into_response());
    }
    authorize(&state, &headers, &query, Method::Get, &bucket, &key)?;
    let version = query.get(sign::VERSION_PARAM).cloned();
    let st = state.clone();
    let (v, bytes) = blocking(move || st.store.get_object(&bucket, &key, version.as_deref())).await?;
    Ok(octets(bytes, &v.version_id))
}

async fn put_object(state: Arc<AppState>, bucket: String, key: String, body: Bytes) -> ApiResult<Response> {
    let v = blocking(move || state.store.put_object(&bucket, &key, &body)).await?;
    Ok((StatusCode::CREATED, Json(v)).into_response())
}

async fn post_object(
    State(state): State<Arc<AppState>>,
    headers: HeaderMap,
    Path((bucket, key)): Path<(String, String)>,
    RawQuery(raw): RawQuery,
    body: Bytes,
) -> ApiResult<Response> {
    let query = parse_query(raw.as_deref(), &[sign::EXPIRES_PARAM, sign::SIGNATURE_PARAM])?;
    authorize(&state, &headers, &query, Method::Post, &bucket, &key)?;
    put_object(state, bucket, key, body).await
}

async fn put_object_direct(
    State(state): State<Arc<AppState>>,
    headers: HeaderMap,
    Path((bucket, key)): Path<(String, String)>,
    RawQuery(raw): RawQuery,
    body: Bytes,
) -> ApiResult<Response> {
    parse_query(raw.as_deref(), &[])?;
    if !bearer_ok(&headers, &state.secret) {
        return Err(ApiError::new(StatusCode::UNAUTHORIZED, "PUT requires bearer credentials"));
    }
    put_object(state, bucket, key, body).await
}

async fn viewer_upload(
    State(state): State<Arc<AppState>>,
    RawQuery(raw): RawQuery,
    body: Bytes,
) -> ApiResult<Response> {
    let query = parse_query(raw.as_deref(), &["key"])?;
    let key = query.get("key").cloned().ok_or_else(|| ApiError::new(StatusCode::BAD_REQUEST, "missing key"))?;
    put_object(state, VIEWER_BUCKET.to_string(), key, body).await
}

async fn viewer_download(State(state): State<Arc<AppState>>, RawQuery(raw): RawQuery) -> ApiResult<Response> {
    let query = parse_query(raw.as_deref(), &["key", sign::VERSION_PARAM])?;
    let key = query.get("key").cloned().ok_or_else(|| ApiError::new(StatusCode::BAD_REQUEST, "missing key"))?;
    let version = query.get(sign::VERSION_PARAM).cloned();
    let (v, bytes) = blocking(move || state.store.get_object(VIEWER_BUCKET, &key, version.as_deref())).await?;
    Ok(octets(bytes, &v.version_id))
}

pub fn router(store: ObjectStore, secret: impl Into<Vec<u8>>) -> Router {
    let state = Arc::new(AppState { store, secret: secret.into() });
    Router::new()
        .route("/healthz", get(|| async { "ok" }))
        .route("/bucket/{bucket}", put(create_bucket))
        .route("/bucket/{bucket}/{*key}", get(get_object).post(post_object).put(put_object_direct))
        .route("/viewer/upload", post(viewer_upload))
        .route("/viewer/download", get(viewer_download))
        .layer(DefaultBodyLimit::max(MAX_OBJECT_BYTES))
        .with_state(state)
}

/// A running store server; dropping it shuts the listener down.
pub struct StoreServer {
    pub addr: SocketAddr,
    pub base_url: String,
    shutdown: Option<oneshot::Sender<()>>,
    task: Option<JoinHandle<()>>,
}

impl StoreServer {
    pub async fn shutdown(mut self) {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
        if let Some(task) = self.task.take() {
            let _ = task.await;
        }
    }
}

impl Drop for StoreServer {
    fn drop(&mut self) {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
    }
}

/// Binds the listener and serves in a background task.
pub async fn serve(config: StoreConfig) -> std::io::Result<StoreServer> {
    let mut store = ObjectStore::open(&config.root).map_err(std::io::Error::other)?;
    if let Some(q) = config.quota_bytes {
        store = store.with_quota(q);
    }
    for b in &config.buckets {
        store.create_bucket(b).map_err(std::io::Error::other)?;
    }
    let app = router(store, config.secret.into_bytes());
    let (addr, shutdown, task) = spawn_router(app, config.addr).await?;
    Ok(StoreServer { addr, base_url: format!("http://{addr}"), shutdown: Some(shutdown), task: Some(task) })
}

/// Serves `app` on `addr` until the returned sender fires or is dropped.
pub(crate) async fn spawn_router(
    app: Router,
    addr: SocketAddr,
) -> std::io::Result<(SocketAddr, oneshot::Sender<()>, JoinHandle<()>)> {
    let listener = TcpListener::bind(addr).await?;
    let addr = listener.local_addr()?;
    let (tx, rx) = oneshot::channel::<()>();
    let task = tokio::spawn(async move {
        let _ = axum::serve(listener, app)
            .with_graceful_shutdown(async move {
                let _ = rx.await;
            })
            .await;
    });
    Ok((addr, tx, task))
}
