//! Streamable HTTP transport for the MCP service.

use std::net::SocketAddr;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::State;
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde_json::json;
use tokio::sync::oneshot;
use tokio::task::JoinHandle;

use super::service::{McpConfig, McpService};

pub const SESSION_HEADER: &str = "mcp-session-id";

fn header_str(headers: &HeaderMap, name: impl header::AsHeaderName) -> &str {
    headers.get(name).and_then(|v| v.to_str().ok()).unwrap_or("")
}

/// Event-stream framing only when the client accepts it and not plain JSON.
fn wants_stream(headers: &HeaderMap) -> bool {
    let accept = header_str(headers, header::ACCEPT).to_ascii_lowercase();
    accept.contains("text/event-stream") && !accept.contains("application/json")
}

async fn mcp(State(svc): State<Arc<McpService>>, headers: HeaderMap, body: Bytes) -> Response {
    let ct = header_str(&headers, header::CONTENT_TYPE).to_ascii_lowercase();
    if ct.split(';').next().map(str::trim) != Some("application/json") {
        return (StatusCode::UNSUPPORTED_MEDIA_TYPE, Json(json!({"error": "content type must be application/json"})))
            .into_response();
    }
    let session = headers.get(SESSION_HEADER).and_then(|v| v.to_str().ok()).map(str::to_string);
    let Some(reply) = svc.handle_body(&body, session.as_deref()).await else {
        return StatusCode::ACCEPTED.into_response();
    };
    if wants_stream(&headers) {
        let frame = format!("event: message\ndata: {reply}\n\n");
        return ([(header::CONTENT_TYPE, "text/event-stream"), (header::CACHE_CONTROL, "no-cache")], frame)
            .into_response();
    }
    Json(reply).into_response()
}

pub fn router(service: Arc<McpService>) -> Router {
    Router::new()
        .route("/mcp", post(mcp))
        .route("/healthz", get(|| async { Json(json!({"status": "ok"})) }))
        .with_state(service)
}

/// A running MCP server; dropping it shuts the listener down.
pub struct McpServer {
    pub addr: SocketAddr,
    pub base_url: String,
    pub service: Arc<McpService>,
    shutdown: Option<oneshot::Sender<()>>,
    task: Option<JoinHandle<()>>,
}

impl McpServer {
    pub fn endpoint(&self) -> String {
        format!("{}/mcp", self.base_url)
    }

    pub async fn shutdown(mut self) {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
        if let Some(task) = self.task.take() {
            let _ = task.await;
        }
    }
}

impl Drop for McpServer {
    fn drop(&mut self) {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
    }
}

pub async fn serve(config: McpConfig) -> std::io::Result<McpServer> {
    let addr = config.addr;
    let service = Arc::new(McpService::new(config));
    let (addr, shutdown, task) = crate::store::server::spawn_router(router(service.clone()), addr).await?;
    Ok(McpServer { addr, base_url: format!("http://{addr}"), service, shutdown: Some(shutdown), task: Some(task) })
}
