//! Shared data model and JSON wire schemas used by every service.

pub mod catalogue;
pub mod chat;
pub mod types;
pub mod validate;

use std::fmt;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use serde_json::Value;

pub use catalogue::{find_tool, tool_catalogue, ToolCategory, ToolSpec};
pub use chat::{to_chat_artifact, ChatArtifact, ChatError, DEFAULT_BUDGET, MIN_BUDGET};
pub use types::*;
pub use validate::SchemaViolation;

pub const CREATE_REQUEST_SCHEMA: &str = include_str!("../../schemas/create_request.json");
pub const MODIFY_REQUEST_SCHEMA: &str = include_str!("../../schemas/modify_request.json");
pub const QUERY_REQUEST_SCHEMA: &str = include_str!("../../schemas/query_request.json");
pub const ARTIFACT_SCHEMA: &str = include_str!("../../schemas/artifact.json");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Endpoint {
    Create,
    Modify,
    Query,
}

impl Endpoint {
    pub const ALL: [Endpoint; 3] = [Endpoint::Create, Endpoint::Modify, Endpoint::Query];

    pub fn path(self) -> &'static str {
        match self {
            Endpoint::Create => "/create",
            Endpoint::Modify => "/modify",
            Endpoint::Query => "/query",
        }
    }

    pub fn operation(self) -> Operation {
        match self {
            Endpoint::Create => Operation::Create,
            Endpoint::Modify => Operation::Modify,
            Endpoint::Query => Operation::Query,
        }
    }

    pub fn schema_text(self) -> &'static str {
        match self {
            Endpoint::Create => CREATE_REQUEST_SCHEMA,
            Endpoint::Modify => MODIFY_REQUEST_SCHEMA,
            Endpoint::Query => QUERY_REQUEST_SCHEMA,
        }
    }

    pub fn schema(self) -> &'static Value {
        static SCHEMAS: OnceLock<[Value; 3]> = OnceLock::new();
        let all = SCHEMAS.get_or_init(|| {
            Endpoint::ALL.map(|e| serde_json::from_str(e.schema_text()).expect("bundled schema is valid JSON"))
        });
        &all[self as usize]
    }
}

impl fmt::Display for Endpoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.path()[1..])
    }
}

pub fn artifact_schema() -> &'static Value {
    static SCHEMA: OnceLock<Value> = OnceLock::new();
    SCHEMA.get_or_init(|| serde_json::from_str(ARTIFACT_SCHEMA).expect("bundled schema is valid JSON"))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "result", rename_all = "lowercase")]
pub enum ValidationReport {
    Ok,
    Invalid { violations: Vec<SchemaViolation> },
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        matches!(self, ValidationReport::Ok)
    }

    pub fn violations(&self) -> &[SchemaViolation] {
        match self {
            ValidationReport::Ok => &[],
            ValidationReport::Invalid { violations } => violations,
        }
    }
}

/// Checks a request body against the bundled schema for `endpoint`.
pub fn validate_request(endpoint: Endpoint, body: &Value) -> ValidationReport {
    let violations = validate::validate(endpoint.schema(), body);
    if violations.is_empty() {
        ValidationReport::Ok
    } else {
        ValidationReport::Invalid { violations }
    }
}

pub const DEFAULT_TIMEOUT_SEC: u64 = 60;

/// Body of any of the three executor endpoints.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ExecRequest {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tool_name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub code_batch: Option<Vec<Value>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub params: Option<Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_target: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input_model: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timeout_sec: Option<u64>,
}

impl ExecRequest {
    /// Effective timeout; zero or absent means the default.
    pub fn timeout(&self) -> std::time::Duration {
        let secs = match self.timeout_sec {
            Some(0) | None => DEFAULT_TIMEOUT_SEC,
            Some(s) => s,
        };
        std::time::Duration::from_secs(secs)
    }

    /// Display name used in manifests.
    pub fn tool_label(&self) -> String {
        match (&self.tool_name, &self.code_batch) {
            (Some(t), _) => t.clone(),
            (None, Some(_)) => "codeBatch".into(),
            (None, None) => String::new(),
        }
    }

    pub fn params_digest(&self) -> String {
        let mut v = serde_json::Map::new();
        v.insert("params".into(), self.params.clone().unwrap_or(Value::Object(Default::default())));
        if let Some(b) = &self.code_batch {
            v.insert("codeBatch".into(), Value::Array(b.clone()));
        }
        json_digest(&Value::Object(v))
    }
}
