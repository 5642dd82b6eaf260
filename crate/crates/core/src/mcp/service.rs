//! Tool-call handling: catalogue, sessions, executor translation, local tools.

use serde::Deserialize;
use serde_json::{json, Value};

use super::docs;
use super::jsonrpc::{self, Request, RpcError};
use super::session::{valid_session_id, SessionState, Sessions, DEFAULT_SESSION};
use crate::exec::{ExecClient, SentRequest, BATCH_TOOL};
use crate::schemas::{
    artifact_schema, find_tool, json_digest, timestamp_now, to_chat_artifact, tool_catalogue, validate, Artifact,
    ChatArtifact, Endpoint, ExecRequest, Manifest, ModelRef, Operation, Status, ToolCategory, ToolSpec,
};
use crate::store::{Method, StoreClient};

pub const PROTOCOL_VERSION: &str = "2025-03-26";
pub const SERVER_NAME: &str = "bimcp";
pub const LOCAL_BACKEND: &str = "mcp-server";

#[derive(Debug, Clone)]
pub struct McpConfig {
    pub addr: std::net::SocketAddr,
    pub exec_url: String,
    pub store_url: String,
    pub store_secret: String,
    pub chat_budget: usize,
    pub bucket: String,
    /// Lifetime of the presigned URLs handed to the executor and to clients.
    pub grant_ttl_sec: u64,
    /// Sent as timeoutSec on every executor request when set.
    pub exec_timeout_sec: Option<u64>,
    /// Keep a copy of every executor request (see [`McpService::sent`]).
    pub record_outbound: bool,
}

impl McpConfig {
    pub fn new(exec_url: impl Into<String>, store_url: impl Into<String>, store_secret: impl Into<String>) -> Self {
        Self {
            addr: std::net::SocketAddr::from(([127, 0, 0, 1], 0)),
            exec_url: exec_url.into(),
            store_url: store_url.into(),
            store_secret: store_secret.into(),
            chat_budget: crate::schemas::DEFAULT_BUDGET,
            bucket: crate::store::server::VIEWER_BUCKET.to_string(),
            grant_ttl_sec: 900,
            exec_timeout_sec: None,
            record_outbound: false,
        }
    }

    /// Reads MCP_PORT, EXEC_URL, STORE_URL, STORE_SECRET and CHAT_BUDGET.
    pub fn from_env() -> Result<Self, String> {
        let var = |k: &str, d: &str| std::env::var(k).unwrap_or_else(|_| d.to_string());
        let secret = std::env::var("STORE_SECRET").map_err(|_| "STORE_SECRET must be set".to_string())?;
        let mut c =
            Self::new(var("EXEC_URL", "http://127.0.0.1:9200"), var("STORE_URL", "http://127.0.0.1:9100"), secret);
        let port: u16 = var("MCP_PORT", "9300").parse().map_err(|e| format!("MCP_PORT: {e}"))?;
        c.addr = std::net::SocketAddr::from(([0, 0, 0, 0], port));
        c.chat_budget = var("CHAT_BUDGET", &crate::schemas::DEFAULT_BUDGET.to_string())
            .parse()
            .map_err(|e| format!("CHAT_BUDGET: {e}"))?;
        if c.chat_budget < crate::schemas::MIN_BUDGET {
            return Err(format!("CHAT_BUDGET must be at least {}", crate::schemas::MIN_BUDGET));
        }
        Ok(c)
    }
}

pub struct McpService {
    config: McpConfig,
    exec: ExecClient,
    store: StoreClient,
    sessions: Sessions,
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase")]
struct CallParams {
    name: String,
    #[serde(default)]
    arguments: Option<Value>,
    #[serde(default)]
    session_id: Option<String>,
}

#[derive(Deserialize)]
struct UploadArgs {
    content: String,
    key: Option<String>,
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase")]
struct DownloadArgs {
    #[serde(rename = "ref")]
    model_ref: Option<String>,
    ttl_sec: Option<u64>,
}

#[derive(Deserialize)]
struct VersionsArgs {
    key: Option<String>,
}

#[derive(Deserialize)]
struct LookupArgs {
    query: String,
    k: Option<usize>,
}

/// One tool descriptor as published by tools/list.
pub fn descriptor(t: &ToolSpec) -> Value {
    json!({"name": t.name, "description": t.description, "inputSchema": t.input_schema, "category": t.category})
}

/// MCP tool result wrapping a chat artifact.
pub fn tool_result(chat: &ChatArtifact) -> Value {
    let text = serde_json::to_string(chat).expect("chat artifacts serialize");
    json!({
        "content": [{"type": "text", "text": text}],
        "structuredContent": chat,
        "isError": !chat.is_ok(),
    })
}

impl McpService {
    pub fn new(config: McpConfig) -> Self {
        let mut exec = ExecClient::new(&config.exec_url);
        if config.record_outbound {
            exec = exec.recording();
        }
        let store = StoreClient::new(&config.store_url, &config.store_secret);
        Self { config, exec, store, sessions: Sessions::default() }
    }

    pub fn config(&self) -> &McpConfig {
        &self.config
    }

    /// Executor requests sent so far, when recording is on.
    pub fn sent(&self) -> Vec<SentRequest> {
        self.exec.sent()
    }

    pub fn session_ids(&self) -> Vec<String> {
        self.sessions.ids()
    }

    pub async fn session(&self, id: &str) -> Option<SessionState> {
        self.sessions.snapshot(id).await
    }

    /// Answers a raw JSON-RPC body. `None` means there is nothing to send back.
    pub async fn handle_body(&self, body: &[u8], default_session: Option<&str>) -> Option<Value> {
        jsonrpc::dispatch(body, |req| self.handle_request(req, default_session)).await
    }

    pub async fn handle_value(&self, msg: &Value) -> Option<Value> {
        self.handle_body(&serde_json::to_vec(msg).expect("values serialize"), None).await
    }

    async fn handle_request(&self, req: Request, default_session: Option<&str>) -> Result<Value, RpcError> {
        match req.method.as_str() {
            "initialize" => Ok(json!({
                "protocolVersion": PROTOCOL_VERSION,
                "capabilities": {"tools": {"listChanged": false}},
                "serverInfo": {"name": SERVER_NAME, "version": env!("CARGO_PKG_VERSION")},
            })),
            "ping" => Ok(json!({})),
            "tools/list" => Ok(json!({"tools": tool_catalogue().iter().map(descriptor).collect::<Vec<_>>()})),
            "tools/call" => self.rpc_call(req.params, default_session).await,
            m if m.starts_with("notifications/") => Ok(Value::Null),
            m => Err(RpcError::method_not_found(m)),
        }
    }

    async fn rpc_call(&self, params: Value, default_session: Option<&str>) -> Result<Value, RpcError> {
        let p: CallParams =
            serde_json::from_value(params).map_err(|e| RpcError::invalid_params(format!("tools/call params: {e}")))?;
        let spec = find_tool(&p.name).ok_or_else(|| RpcError::invalid_params(format!("unknown tool: {}", p.name)))?;
        let args = p.arguments.unwrap_or_else(|| json!({}));
        let violations = validate::validate(&spec.input_schema, &args);
        if !violations.is_empty() {
            let first = &violations[0];
            return Err(RpcError::invalid_params(format!(
                "invalid arguments for {}: {} at {:?}",
                spec.name, first.message, first.path
            ))
            .with_data(json!({"violations": violations})));
        }
        let sid = p.session_id.as_deref().or(default_session).unwrap_or(DEFAULT_SESSION);
        if !valid_session_id(sid) {
            return Err(RpcError::invalid_params(format!("invalid sessionId {sid:?}")));
        }
        Ok(tool_result(&self.call_tool(sid, &spec.name, &args).await))
    }

    /// Runs one tool call in a session. Arguments are assumed valid.
    pub async fn call_tool(&self, session_id: &str, tool: &str, args: &Value) -> ChatArtifact {
        let session = self.sessions.get_or_create(session_id);
        let mut state = session.lock().await;
        let chat = match find_tool(tool) {
            None => self.local_error(Operation::Query, tool, args, format!("unknown tool: {tool}")),
            Some(spec) => match spec.category {
                ToolCategory::BimLow | ToolCategory::BimHigh => self.call_executor(&state, spec, args).await,
                ToolCategory::Storage | ToolCategory::Knowledge => self.call_local(&state, spec, args).await,
            },
        };
        state.record(chat.clone());
        chat
    }

    fn route(spec: &ToolSpec, args: &Value) -> (Endpoint, ExecRequest) {
        let read_only_batch = spec.name == BATCH_TOOL && args.get("readOnly") == Some(&Value::Bool(true));
        if read_only_batch {
            let ops = args.get("ops").and_then(Value::as_array).cloned().unwrap_or_default();
            return (Endpoint::Query, ExecRequest { code_batch: Some(ops), ..Default::default() });
        }
        let endpoint = match spec.endpoint.unwrap_or(Operation::Query) {
            Operation::Create => Endpoint::Create,
            Operation::Modify => Endpoint::Modify,
            Operation::Query => Endpoint::Query,
        };
        (endpoint, ExecRequest { tool_name: Some(spec.name.clone()), params: Some(args.clone()), ..Default::default() })
    }

    async fn call_executor(&self, state: &SessionState, spec: &ToolSpec, args: &Value) -> ChatArtifact {
        let (endpoint, mut req) = Self::route(spec, args);
        let op = endpoint.operation();
        let ttl = self.config.grant_ttl_sec;
        if endpoint != Endpoint::Create {
            let Some(current) = &state.current_model else {
                return self.local_error(
                    op,
                    &spec.name,
                    args,
                    "the session has no current model; create or upload one first",
                );
            };
            match self.store.presign_get(current, ttl) {
                Ok(u) => req.input_model = Some(u),
                Err(e) => return self.local_error(op, &spec.name, args, e.to_string()),
            }
        }
        if endpoint != Endpoint::Query {
            let key = match (endpoint, &state.current_model) {
                (Endpoint::Modify, Some(current)) => current.key.clone(),
                _ => state.model_key(),
            };
            match self.store.presign(Method::Post, &self.config.bucket, &key, None, ttl) {
                Ok(u) => req.output_target = Some(u),
                Err(e) => return self.local_error(op, &spec.name, args, e.to_string()),
            }
        }
        req.timeout_sec = self.config.exec_timeout_sec;
        let artifact = match self.exec.call(endpoint, &req).await {
            Ok(a) => a,
            Err(e) => return self.local_error(op, &spec.name, args, e.to_string()),
        };
        if let Err(problem) = check_artifact(&artifact, op) {
            return self.local_error(op, &spec.name, args, format!("executor returned an invalid artifact: {problem}"));
        }
        self.compact(&artifact)
    }

    async fn call_local(&self, state: &SessionState, spec: &ToolSpec, args: &Value) -> ChatArtifact {
        let tool = spec.name.as_str();
        let result = match tool {
            "upload_model" => self.upload(state, args).await.map(|(r, v)| (Operation::Create, Some(r), v)),
            "download_model" => self.download(state, args).await.map(|(r, v)| (Operation::Query, Some(r), v)),
            "list_model_versions" => self.versions(state, args).await.map(|v| (Operation::Query, None, v)),
            "lookup_docs" => lookup_docs(args).map(|v| (Operation::Query, None, v)),
            t => Err(format!("no local handler for {t}")),
        };
        let op = if tool == "upload_model" { Operation::Create } else { Operation::Query };
        match result {
            Ok((op, file_ref, logical)) => {
                let a = Artifact {
                    status: Status::Ok,
                    file_ref,
                    manifest: self.local_manifest(op, tool, args),
                    logical_result: Some(logical),
                    diff_raw: None,
                    diff_summary: None,
                    error_message: None,
                };
                let chat = self.compact(&a);
                if chat.truncated && tool == "download_model" {
                    return self.compact(&without_text(a));
                }
                chat
            }
            Err(msg) => self.local_error(op, tool, args, msg),
        }
    }

    async fn upload(&self, state: &SessionState, args: &Value) -> Result<(ModelRef, Value), String> {
        let a: UploadArgs = serde_json::from_value(args.clone()).map_err(|e| e.to_string())?;
        crate::ifc::parse(&a.content).map_err(|e| format!("content is not a readable IFC model: {e}"))?;
        let key = a.key.unwrap_or_else(|| state.model_key());
        let v = self.store.put(&self.config.bucket, &key, a.content.into_bytes()).await.map_err(|e| e.to_string())?;
        let r = ModelRef::new(&v.bucket, &v.key, &v.version_id);
        Ok((r, json!({"size": v.size, "contentHash": v.content_hash, "createdAt": v.created_at})))
    }

    async fn download(&self, state: &SessionState, args: &Value) -> Result<(ModelRef, Value), String> {
        let a: DownloadArgs = serde_json::from_value(args.clone()).map_err(|e| e.to_string())?;
        let r = match a.model_ref {
            Some(s) => ModelRef::parse_shorthand(&s).ok_or_else(|| format!("ref {s:?} is not bucket/key@versionId"))?,
            None => state.current_model.clone().ok_or("the session has no current model")?,
        };
        let url =
            self.store.presign_get(&r, a.ttl_sec.unwrap_or(self.config.grant_ttl_sec)).map_err(|e| e.to_string())?;
        let bytes = self.store.get_ref(&r).await.map_err(|e| e.to_string())?;
        Ok((r, json!({"byteLength": bytes.len(), "downloadUrl": url, "text": String::from_utf8_lossy(&bytes)})))
    }

    async fn versions(&self, state: &SessionState, args: &Value) -> Result<Value, String> {
        let a: VersionsArgs = serde_json::from_value(args.clone()).map_err(|e| e.to_string())?;
        let key =
            a.key.or_else(|| state.current_model.as_ref().map(|r| r.key.clone())).unwrap_or_else(|| state.model_key());
        let versions = match self.store.list_versions(&self.config.bucket, &key).await {
            Ok(v) => v,
            Err(e) if e.status() == Some(reqwest::StatusCode::NOT_FOUND) => Vec::new(),
            Err(e) => return Err(e.to_string()),
        };
        let list: Vec<Value> = versions
            .iter()
            .map(|v| json!({"versionId": v.version_id, "size": v.size, "contentHash": v.content_hash, "createdAt": v.created_at}))
            .collect();
        Ok(json!({"bucket": self.config.bucket, "key": key, "versions": list}))
    }

    fn local_manifest(&self, op: Operation, tool: &str, args: &Value) -> Manifest {
        Manifest {
            created_at: timestamp_now(),
            operation: op,
            tool_name: tool.to_string(),
            backend_id: LOCAL_BACKEND.to_string(),
            input_model: None,
            params_digest: json_digest(&json!({"params": args})),
            capabilities: Default::default(),
        }
    }

    fn local_error(&self, op: Operation, tool: &str, args: &Value, msg: impl Into<String>) -> ChatArtifact {
        self.compact(&Artifact::error(self.local_manifest(op, tool, args), msg))
    }

    fn compact(&self, a: &Artifact) -> ChatArtifact {
        match to_chat_artifact(a, self.config.chat_budget) {
            Ok(c) => c,
            Err(e) => ChatArtifact {
                status: Status::Error,
                operation: a.manifest.operation,
                file_ref: None,
                summary_line: format!("{} failed: {e}", a.manifest.tool_name),
                diff_summary: None,
                logical_result: None,
                truncated: true,
            },
        }
    }
}

fn check_artifact(a: &Artifact, op: Operation) -> Result<(), String> {
    let v = serde_json::to_value(a).map_err(|e| e.to_string())?;
    if let Some(first) = validate::validate(artifact_schema(), &v).first() {
        return Err(format!("{} at {:?}", first.message, first.path));
    }
    a.check_invariants()?;
    if a.manifest.operation != op {
        return Err(format!("operation {} does not match the endpoint", a.manifest.operation.as_str()));
    }
    Ok(())
}

/// Drops the model text from a download result that does not fit the chat budget.
fn without_text(mut a: Artifact) -> Artifact {
    if let Some(Value::Object(m)) = a.logical_result.as_mut() {
        m.remove("text");
        m.insert("textOmitted".into(), Value::Bool(true));
    }
    a
}

fn lookup_docs(args: &Value) -> Result<Value, String> {
    let a: LookupArgs = serde_json::from_value(args.clone()).map_err(|e| e.to_string())?;
    let hits = docs::lookup(docs::corpus(), &a.query, a.k.unwrap_or(docs::DEFAULT_K));
    Ok(json!({"results": hits}))
}
