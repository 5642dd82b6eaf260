//! The stateless BIM execution service and the adapter contract behind it.
//!
//! The service exposes `/create`, `/modify` and `/query`. Every request names
//! its model through presigned URLs; nothing is kept between requests. A
//! backend plugs in by implementing [`Adapter`].

pub mod client;
pub mod contract;
pub mod native;
pub mod service;
pub mod transport;

use std::collections::BTreeMap;
use std::fmt;

use serde_json::Value;

use crate::ifc::guid::GuidGenerator;
use crate::schemas::{sha256_hex, DiffRaw};

pub use client::{ExecClient, ExecClientError, SentRequest};
pub use native::NativeAdapter;
pub use service::{router, router_with, serve, serve_adapter, ExecConfig, ExecServer, Executor, Rejection};
pub use transport::{IoRecord, ModelTransport};

/// Name of the catalogue tool that carries a low-level op batch in `params.ops`.
pub const BATCH_TOOL: &str = "run_batch";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AdapterErrorKind {
    UnknownTool,
    InvalidParams,
    /// A tool precondition failed (missing reference, geometric misfit, ...).
    Precondition,
    Parse,
    /// The operation would leave the model structurally invalid.
    InvalidModel,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AdapterError {
    pub kind: AdapterErrorKind,
    pub message: String,
}

impl AdapterError {
    pub fn new(kind: AdapterErrorKind, message: impl Into<String>) -> Self {
        Self { kind, message: message.into() }
    }

    pub fn unknown_tool(name: &str) -> Self {
        Self::new(AdapterErrorKind::UnknownTool, format!("unknown tool {name:?}"))
    }

    pub fn params(message: impl Into<String>) -> Self {
        Self::new(AdapterErrorKind::InvalidParams, message)
    }

    pub fn precondition(message: impl Into<String>) -> Self {
        Self::new(AdapterErrorKind::Precondition, message)
    }
}

impl fmt::Display for AdapterError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for AdapterError {}

/// Per-request state handed to the adapter.
pub struct RunContext {
    pub guids: GuidGenerator,
    /// Timestamp to stamp into saved models.
    pub timestamp: String,
}

impl RunContext {
    /// Deterministic mode derives GlobalIds from the request itself, so
    /// identical requests against identical input produce identical output.
    pub fn for_request(deterministic: bool, input: &[u8], tool: &str, params_digest: &str) -> Self {
        if deterministic {
            let mut material = Vec::with_capacity(input.len() + 128);
            material.extend_from_slice(b"bimcp-guid\n");
            material.extend_from_slice(tool.as_bytes());
            material.push(b'\n');
            material.extend_from_slice(params_digest.as_bytes());
            material.push(b'\n');
            material.extend_from_slice(input);
            let digest = hex::decode(sha256_hex(&material)).expect("hex digest");
            let mut seed = [0u8; 32];
            seed.copy_from_slice(&digest);
            Self { guids: GuidGenerator::seeded(seed), timestamp: "1970-01-01T00:00:00".into() }
        } else {
            Self {
                guids: GuidGenerator::random(),
                timestamp: chrono::Utc::now().format("%Y-%m-%dT%H:%M:%S").to_string(),
            }
        }
    }
}

/// The contract every BIM backend implements behind the three endpoints.
///
/// Implementations hold no state between calls. Mutating operations work on
/// a model the service owns; on error the service discards it, which gives
/// all-or-nothing semantics per request.
pub trait Adapter: Send + Sync + 'static {
    type Model: Clone + Send + Sync + 'static;

    fn backend_id(&self) -> &str;

    /// Extra manifest capability flags.
    fn capabilities(&self) -> BTreeMap<String, Value> {
        BTreeMap::new()
    }

    /// Starting state for `/create` without a template.
    fn empty_model(&self) -> Self::Model;

    fn load_model(&self, bytes: &[u8]) -> Result<Self::Model, AdapterError>;

    fn save_model(&self, model: &Self::Model, ctx: &RunContext) -> Vec<u8>;

    /// True for tools that only read the model and belong on `/query`.
    fn is_query_tool(&self, tool: &str) -> bool;

    fn run_high_level(
        &self,
        tool: &str,
        params: &Value,
        model: &mut Self::Model,
        ctx: &mut RunContext,
    ) -> Result<Option<Value>, AdapterError>;

    fn run_batch(
        &self,
        ops: &[Value],
        model: &mut Self::Model,
        ctx: &mut RunContext,
    ) -> Result<Option<Value>, AdapterError>;

    fn run_query(&self, tool: &str, params: &Value, model: &Self::Model) -> Result<Value, AdapterError>;

    fn diff(&self, old: &Self::Model, new: &Self::Model) -> DiffRaw;

    /// Structural acceptance check applied before any result is stored.
    fn validate(&self, _model: &Self::Model) -> Result<(), AdapterError> {
        Ok(())
    }
}
