//! HTTP client for the executor endpoints.

use std::sync::{Arc, Mutex};

use reqwest::StatusCode;
use serde_json::Value;
use thiserror::Error;

use crate::schemas::{Artifact, Endpoint, ExecRequest};

#[derive(Debug, Error)]
pub enum ExecClientError {
    #[error("executor unreachable: {0}")]
    Transport(#[from] reqwest::Error),
    #[error("executor refused the request ({status}): {body}")]
    Rejected { status: StatusCode, body: Value },
    #[error("executor returned an unreadable artifact: {0}")]
    Decode(String),
}

/// One request sent by an [`ExecClient`], kept when recording is on.
#[derive(Debug, Clone, PartialEq)]
pub struct SentRequest {
    pub endpoint: Endpoint,
    pub body: Value,
}

#[derive(Debug, Clone)]
pub struct ExecClient {
    base_url: String,
    http: reqwest::Client,
    sent: Option<Arc<Mutex<Vec<SentRequest>>>>,
}

impl ExecClient {
    pub fn new(base_url: impl Into<String>) -> Self {
        Self { base_url: base_url.into().trim_end_matches('/').to_string(), http: reqwest::Client::new(), sent: None }
    }

    /// Reads EXEC_URL.
    pub fn from_env() -> Result<Self, String> {
        std::env::var("EXEC_URL").map(Self::new).map_err(|_| "EXEC_URL must be set".to_string())
    }

    /// Keeps a copy of every outbound body.
    pub fn recording(mut self) -> Self {
        self.sent = Some(Arc::new(Mutex::new(Vec::new())));
        self
    }

    pub fn sent(&self) -> Vec<SentRequest> {
        self.sent.as_ref().map(|s| s.lock().unwrap().clone()).unwrap_or_default()
    }

    pub fn base_url(&self) -> &str {
        &self.base_url
    }

    /// Posts a raw body and returns the status with the decoded reply.
    pub async fn post_raw(&self, endpoint: Endpoint, body: &Value) -> Result<(StatusCode, Value), ExecClientError> {
        if let Some(s) = &self.sent {
            s.lock().unwrap().push(SentRequest { endpoint, body: body.clone() });
        }
        let resp = self.http.post(format!("{}{}", self.base_url, endpoint.path())).json(body).send().await?;
        let status = resp.status();
        let text = resp.text().await?;
        let value = serde_json::from_str(&text).unwrap_or(Value::String(text));
        Ok((status, value))
    }

    pub async fn call(&self, endpoint: Endpoint, req: &ExecRequest) -> Result<Artifact, ExecClientError> {
        let body = serde_json::to_value(req).expect("requests serialize");
        let (status, value) = self.post_raw(endpoint, &body).await?;
        if !status.is_success() {
            return Err(ExecClientError::Rejected { status, body: value });
        }
        serde_json::from_value(value).map_err(|e| ExecClientError::Decode(e.to_string()))
    }

    pub async fn health(&self) -> Result<(), ExecClientError> {
        self.http.get(format!("{}/healthz", self.base_url)).send().await?.error_for_status()?;
        Ok(())
    }
}
