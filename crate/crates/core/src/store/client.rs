//! HTTP client for the store, for services that hold the store secret.

use reqwest::StatusCode;
use thiserror::Error;

use super::sign::{self, GrantError, Method};
use super::ObjectVersion;
use crate::schemas::ModelRef;

#[derive(Debug, Error)]
pub enum StoreClientError {
    #[error("store unreachable: {0}")]
    Transport(#[from] reqwest::Error),
    #[error("store returned {status}: {message}")]
    Status { status: StatusCode, message: String },
    #[error(transparent)]
    Grant(#[from] GrantError),
    #[error("not a store object URL: {0}")]
    BadUrl(String),
}

impl StoreClientError {
    pub fn status(&self) -> Option<StatusCode> {
        match self {
            StoreClientError::Status { status, .. } => Some(*status),
            _ => None,
        }
    }
}

async fn check(resp: reqwest::Response) -> Result<reqwest::Response, StoreClientError> {
    if resp.status().is_success() {
        return Ok(resp);
    }
    let status = resp.status();
    let body = resp.text().await.unwrap_or_default();
    let message = serde_json::from_str::<serde_json::Value>(&body)
        .ok()
        .and_then(|v| v.get("error").and_then(|e| e.as_str()).map(str::to_string))
        .unwrap_or(body);
    Err(StoreClientError::Status { status, message })
}

/// Fetches a presigned GET URL. No credentials are sent.
pub async fn fetch_presigned(http: &reqwest::Client, url: &str) -> Result<(Vec<u8>, Option<String>), StoreClientError> {
    let resp = check(http.get(url).send().await?).await?;
    let version = resp.headers().get("x-version-id").and_then(|v| v.to_str().ok()).map(str::to_string);
    Ok((resp.bytes().await?.to_vec(), version))
}

/// Uploads to a presigned POST URL. No credentials are sent.
pub async fn upload_presigned(
    http: &reqwest::Client,
    url: &str,
    bytes: Vec<u8>,
) -> Result<ObjectVersion, StoreClientError> {
    let resp =
        http.post(url).header(reqwest::header::CONTENT_TYPE, "application/octet-stream").body(bytes).send().await?;
    Ok(check(resp).await?.json().await?)
}

#[derive(Debug, Clone)]
pub struct StoreClient {
    base_url: String,
    secret: String,
    http: reqwest::Client,
}

impl StoreClient {
    pub fn new(base_url: impl Into<String>, secret: impl Into<String>) -> Self {
        Self {
            base_url: base_url.into().trim_end_matches('/').to_string(),
            secret: secret.into(),
            http: reqwest::Client::new(),
        }
    }

    /// Reads STORE_URL and STORE_SECRET.
    pub fn from_env() -> Result<Self, String> {
        let url = std::env::var("STORE_URL").map_err(|_| "STORE_URL must be set".to_string())?;
        let secret = std::env::var("STORE_SECRET").map_err(|_| "STORE_SECRET must be set".to_string())?;
        Ok(Self::new(url, secret))
    }

    pub fn base_url(&self) -> &str {
        &self.base_url
    }

    pub fn http(&self) -> &reqwest::Client {
        &self.http
    }

    fn object_url(&self, bucket: &str, key: &str) -> String {
        format!("{}/bucket/{}/{}", self.base_url, sign::encode_key(bucket), sign::encode_key(key))
    }

    pub fn presign(
        &self,
        method: Method,
        bucket: &str,
        key: &str,
        version_id: Option<&str>,
        ttl_sec: u64,
    ) -> Result<String, StoreClientError> {
        Ok(sign::presign_url(&self.base_url, self.secret.as_bytes(), method, bucket, key, version_id, ttl_sec)?)
    }

    pub fn presign_get(&self, r: &ModelRef, ttl_sec: u64) -> Result<String, StoreClientError> {
        self.presign(Method::Get, &r.bucket, &r.key, Some(&r.version_id), ttl_sec)
    }

    pub async fn health(&self) -> Result<(), StoreClientError> {
        check(self.http.get(format!("{}/healthz", self.base_url)).send().await?).await?;
        Ok(())
    }

    pub async fn create_bucket(&self, bucket: &str) -> Result<(), StoreClientError> {
        let url = format!("{}/bucket/{}", self.base_url, sign::encode_key(bucket));
        check(self.http.put(url).bearer_auth(&self.secret).send().await?).await?;
        Ok(())
    }

    pub async fn put(&self, bucket: &str, key: &str, bytes: Vec<u8>) -> Result<ObjectVersion, StoreClientError> {
        let resp = self
            .http
            .put(self.object_url(bucket, key))
            .bearer_auth(&self.secret)
            .header(reqwest::header::CONTENT_TYPE, "application/octet-stream")
            .body(bytes)
            .send()
            .await?;
        Ok(check(resp).await?.json().await?)
    }

    pub async fn get(&self, bucket: &str, key: &str, version_id: Option<&str>) -> Result<Vec<u8>, StoreClientError> {
        let mut url = self.object_url(bucket, key);
        if let Some(v) = version_id {
            url.push('?');
            url.push_str(
                &url::form_urlencoded::Serializer::new(String::new()).append_pair(sign::VERSION_PARAM, v).finish(),
            );
        }
        let resp = self.http.get(url).bearer_auth(&self.secret).send().await?;
        Ok(check(resp).await?.bytes().await?.to_vec())
    }

    pub async fn get_ref(&self, r: &ModelRef) -> Result<Vec<u8>, StoreClientError> {
        self.get(&r.bucket, &r.key, Some(&r.version_id)).await
    }

    pub async fn list_versions(&self, bucket: &str, key: &str) -> Result<Vec<ObjectVersion>, StoreClientError> {
        let url = format!("{}/versions", self.object_url(bucket, key));
        Ok(check(self.http.get(url).bearer_auth(&self.secret).send().await?).await?.json().await?)
    }
}
