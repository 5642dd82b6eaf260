//! Minimal MCP client over HTTP JSON-RPC.

use std::sync::atomic::{AtomicU64, Ordering};

use serde_json::{json, Value};

use crate::schemas::ChatArtifact;

#[derive(Debug, thiserror::Error)]
pub enum ClientError {
    #[error("MCP server at {url} unreachable: {source}")]
    Unreachable { url: String, source: reqwest::Error },
    #[error("MCP server returned HTTP {0}")]
    Http(reqwest::StatusCode),
    #[error("JSON-RPC error {code}: {message}")]
    Rpc { code: i64, message: String },
    #[error("unexpected reply: {0}")]
    Protocol(String),
}

#[derive(Debug)]
pub struct McpClient {
    http: reqwest::Client,
    url: String,
    next: AtomicU64,
}

impl McpClient {
    pub fn new(url: impl Into<String>) -> Self {
        Self { http: reqwest::Client::new(), url: url.into(), next: AtomicU64::new(1) }
    }

    /// Reads MCP_URL, defaulting to a local server.
    pub fn from_env() -> Self {
        Self::new(std::env::var("MCP_URL").unwrap_or_else(|_| "http://127.0.0.1:9300/mcp".into()))
    }

    pub fn url(&self) -> &str {
        &self.url
    }

    pub async fn request(&self, method: &str, params: Value) -> Result<Value, ClientError> {
        let id = self.next.fetch_add(1, Ordering::Relaxed);
        let body = json!({"jsonrpc": "2.0", "id": id, "method": method, "params": params});
        let resp = self
            .http
            .post(&self.url)
            .json(&body)
            .send()
            .await
            .map_err(|source| ClientError::Unreachable { url: self.url.clone(), source })?;
        if !resp.status().is_success() {
            return Err(ClientError::Http(resp.status()));
        }
        let reply: Value = resp.json().await.map_err(|e| ClientError::Protocol(e.to_string()))?;
        if let Some(e) = reply.get("error") {
            return Err(ClientError::Rpc {
                code: e["code"].as_i64().unwrap_or(0),
                message: e["message"].as_str().unwrap_or("").to_string(),
            });
        }
        reply.get("result").cloned().ok_or_else(|| ClientError::Protocol(reply.to_string()))
    }

    pub async fn initialize(&self) -> Result<Value, ClientError> {
        self.request("initialize", json!({"clientInfo": {"name": "harness", "version": env!("CARGO_PKG_VERSION")}}))
            .await
    }

    pub async fn list_tools(&self) -> Result<Vec<Value>, ClientError> {
        let r = self.request("tools/list", json!({})).await?;
        r["tools"].as_array().cloned().ok_or_else(|| ClientError::Protocol("tools/list without tools".into()))
    }

    pub async fn call_tool(&self, session: &str, name: &str, arguments: &Value) -> Result<ChatArtifact, ClientError> {
        let r = self.request("tools/call", json!({"name": name, "arguments": arguments, "sessionId": session})).await?;
        serde_json::from_value(r["structuredContent"].clone()).map_err(|e| ClientError::Protocol(e.to_string()))
    }
}

impl McpClient {
    /// Downloads a stored model through download_model and its presigned URL.
    pub async fn fetch_model(&self, session: &str, model: &crate::schemas::ModelRef) -> Result<Vec<u8>, ClientError> {
        let chat = self.call_tool(session, "download_model", &json!({"ref": model.to_string()})).await?;
        if !chat.is_ok() {
            return Err(ClientError::Protocol(chat.summary_line));
        }
        let url = chat
            .logical_result
            .as_ref()
            .and_then(|l| l["downloadUrl"].as_str())
            .ok_or_else(|| ClientError::Protocol("download_model returned no URL".into()))?
            .to_string();
        let resp =
            self.http.get(&url).send().await.map_err(|source| ClientError::Unreachable { url: url.clone(), source })?;
        if !resp.status().is_success() {
            return Err(ClientError::Http(resp.status()));
        }
        Ok(resp.bytes().await.map_err(|e| ClientError::Protocol(e.to_string()))?.to_vec())
    }
}
