//! Model I/O through presigned URLs, with an optional record of every call.

use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use crate::schemas::ModelRef;
use crate::store::client::{fetch_presigned, upload_presigned};
use crate::store::sign::parse_object_url;
use crate::store::{ObjectVersion, StoreClientError};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IoRecord {
    pub method: String,
    pub url: String,
    pub bytes: usize,
    /// HTTP status, or 0 when the request never got a response.
    pub status: u16,
}

#[derive(Debug, Clone, Default)]
pub struct ModelTransport {
    http: reqwest::Client,
    log: Option<Arc<Mutex<Vec<IoRecord>>>>,
}

impl ModelTransport {
    pub fn new(http: reqwest::Client) -> Self {
        Self { http, log: None }
    }

    /// Same transport, also appending each call to a shared log.
    pub fn recording(http: reqwest::Client) -> (Self, Arc<Mutex<Vec<IoRecord>>>) {
        let log = Arc::new(Mutex::new(Vec::new()));
        (Self { http, log: Some(log.clone()) }, log)
    }

    fn record(&self, method: &str, url: &str, bytes: usize, status: u16) {
        if let Some(log) = &self.log {
            log.lock().unwrap().push(IoRecord { method: method.into(), url: url.into(), bytes, status });
        }
    }

    fn status_of(r: &Result<impl Sized, StoreClientError>) -> u16 {
        match r {
            Ok(_) => 200,
            Err(e) => e.status().map(|s| s.as_u16()).unwrap_or(0),
        }
    }

    /// Downloads a model and names the version that was actually served.
    pub async fn fetch(&self, url: &str) -> Result<(Vec<u8>, Option<ModelRef>), StoreClientError> {
        let r = fetch_presigned(&self.http, url).await;
        let n = r.as_ref().map(|(b, _)| b.len()).unwrap_or(0);
        self.record("GET", url, n, Self::status_of(&r));
        let (bytes, served) = r?;
        let model_ref = parse_object_url(url).and_then(|(bucket, key, v)| {
            let version = served.or(v)?;
            Some(ModelRef::new(bucket, key, version))
        });
        Ok((bytes, model_ref))
    }

    pub async fn upload(&self, url: &str, bytes: Vec<u8>) -> Result<ObjectVersion, StoreClientError> {
        let n = bytes.len();
        let r = upload_presigned(&self.http, url, bytes).await;
        self.record("POST", url, n, Self::status_of(&r));
        r
    }
}
