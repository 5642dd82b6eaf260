//! The HTTP executor: `/create`, `/modify` and `/query` over any [`Adapter`].

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::{Arc, Mutex};

use axum::extract::rejection::JsonRejection;
use axum::extract::State;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde_json::{json, Value};
use tokio::sync::oneshot;
use tokio::task::JoinHandle;

use super::native::NativeAdapter;
use super::transport::{IoRecord, ModelTransport};
use super::{Adapter, RunContext};
use crate::schemas::{
    format_timestamp, summarize_diff, timestamp_now, validate_request, Artifact, Endpoint, ExecRequest, Manifest,
    ModelRef, Operation, SchemaViolation, Status,
};
use crate::store::server::spawn_router;

#[derive(Debug, Clone)]
pub struct ExecConfig {
    pub addr: SocketAddr,
    /// Directory for per-request scratch files; each is removed when its request ends.
    pub scratch_dir: Option<PathBuf>,
    /// Derive GlobalIds and timestamps from the request so output is reproducible.
    pub deterministic: bool,
    /// Keep a log of every presigned URL call (see [`ExecServer::io_log`]).
    pub record_io: bool,
}

impl Default for ExecConfig {
    fn default() -> Self {
        Self { addr: SocketAddr::from(([127, 0, 0, 1], 0)), scratch_dir: None, deterministic: false, record_io: false }
    }
}

impl ExecConfig {
    /// Reads EXEC_PORT, SCRATCH_DIR and TEST_DETERMINISTIC.
    pub fn from_env() -> Result<Self, String> {
        let port: u16 = std::env::var("EXEC_PORT")
            .unwrap_or_else(|_| "9200".into())
            .parse()
            .map_err(|e| format!("EXEC_PORT: {e}"))?;
        let deterministic = matches!(std::env::var("TEST_DETERMINISTIC").as_deref(), Ok("1" | "true" | "yes"));
        Ok(Self {
            addr: SocketAddr::from(([0, 0, 0, 0], port)),
            scratch_dir: std::env::var_os("SCRATCH_DIR").map(PathBuf::from),
            deterministic,
            record_io: false,
        })
    }
}

/// Request processing, independent of HTTP.
pub struct Executor<A: Adapter> {
    adapter: Arc<A>,
    transport: ModelTransport,
    config: ExecConfig,
}

/// Why a request body was refused before any work started.
#[derive(Debug, Clone, PartialEq)]
pub enum Rejection {
    Malformed(String),
    Invalid(Vec<SchemaViolation>),
}

struct Outcome<M> {
    input: Option<ModelRef>,
    result: Result<Computed<M>, String>,
}

struct Computed<M> {
    ctx: RunContext,
    logical: Option<Value>,
    /// Old and new model for mutating operations; none for queries.
    models: Option<(M, M)>,
}

/// Removes the scratch file when the request finishes, however it finishes.
struct Scratch(Option<PathBuf>);

impl Drop for Scratch {
    fn drop(&mut self) {
        if let Some(p) = &self.0 {
            let _ = std::fs::remove_file(p);
        }
    }
}

impl<A: Adapter> Executor<A> {
    pub fn new(adapter: A, config: ExecConfig) -> (Self, Option<Arc<Mutex<Vec<IoRecord>>>>) {
        let http = reqwest::Client::new();
        let (transport, log) = if config.record_io {
            let (t, log) = ModelTransport::recording(http);
            (t, Some(log))
        } else {
            (ModelTransport::new(http), None)
        };
        (Self { adapter: Arc::new(adapter), transport, config }, log)
    }

    fn manifest(&self, op: Operation, req: &ExecRequest) -> Manifest {
        let created_at =
            if self.config.deterministic { format_timestamp(chrono::DateTime::UNIX_EPOCH) } else { timestamp_now() };
        Manifest {
            created_at,
            operation: op,
            tool_name: req.tool_label(),
            backend_id: self.adapter.backend_id().to_string(),
            input_model: None,
            params_digest: req.params_digest(),
            capabilities: self.adapter.capabilities(),
        }
    }

    /// Validates and runs one request body.
    pub async fn handle(&self, endpoint: Endpoint, body: &Value) -> Result<Artifact, Rejection> {
        if let crate::schemas::ValidationReport::Invalid { violations } = validate_request(endpoint, body) {
            return Err(Rejection::Invalid(violations));
        }
        let req: ExecRequest = serde_json::from_value(body.clone()).map_err(|e| Rejection::Malformed(e.to_string()))?;
        let op = endpoint.operation();
        let mut manifest = self.manifest(op, &req);
        let limit = req.timeout();
        let outcome = match tokio::time::timeout(limit, self.compute(op, &req)).await {
            Ok(o) => o,
            Err(_) => {
                Outcome { input: None, result: Err(format!("request exceeded its {} s time limit", limit.as_secs())) }
            }
        };
        manifest.input_model = outcome.input.clone();
        let computed = match outcome.result {
            Ok(c) => c,
            Err(msg) => return Ok(Artifact::error(manifest, msg)),
        };
        match computed.models {
            None => Ok(Artifact {
                status: Status::Ok,
                file_ref: outcome.input,
                manifest,
                logical_result: Some(computed.logical.unwrap_or(Value::Null)),
                diff_raw: None,
                diff_summary: None,
                error_message: None,
            }),
            Some((old, new)) => {
                let target = req.output_target.as_deref().expect("schema requires outputTarget");
                match self.store_result(target, &new, &computed.ctx).await {
                    Err(msg) => Ok(Artifact::error(manifest, msg)),
                    Ok(file_ref) => {
                        let mut diff = self.adapter.diff(&old, &new);
                        diff.old_ref = outcome.input;
                        diff.new_ref = Some(file_ref.clone());
                        let summary = summarize_diff(&diff);
                        Ok(Artifact {
                            status: Status::Ok,
                            file_ref: Some(file_ref),
                            manifest,
                            logical_result: computed.logical,
                            diff_raw: Some(diff),
                            diff_summary: Some(summary),
                            error_message: None,
                        })
                    }
                }
            }
        }
    }

    async fn compute(&self, op: Operation, req: &ExecRequest) -> Outcome<A::Model> {
        let (bytes, input) = match &req.input_model {
            Some(url) => match self.transport.fetch(url).await {
                Ok((b, r)) => (b, r),
                Err(e) => return Outcome { input: None, result: Err(format!("cannot fetch input model: {e}")) },
            },
            None => (Vec::new(), None),
        };
        let adapter = self.adapter.clone();
        let deterministic = self.config.deterministic;
        let req = req.clone();
        let job = tokio::task::spawn_blocking(move || run(&*adapter, op, &req, &bytes, deterministic));
        let result = match job.await {
            Ok(r) => r,
            Err(e) => Err(format!("backend failed: {e}")),
        };
        Outcome { input, result }
    }

    async fn store_result(&self, target: &str, model: &A::Model, ctx: &RunContext) -> Result<ModelRef, String> {
        let bytes = self.adapter.save_model(model, ctx);
        let _scratch = match &self.config.scratch_dir {
            Some(dir) => {
                let path = dir.join(format!("{}.ifc", ulid::Ulid::new()));
                std::fs::write(&path, &bytes).map_err(|e| format!("scratch write failed: {e}"))?;
                Scratch(Some(path))
            }
            None => Scratch(None),
        };
        let v = self.transport.upload(target, bytes).await.map_err(|e| format!("cannot store result: {e}"))?;
        Ok(ModelRef::new(v.bucket, v.key, v.version_id))
    }
}

fn run<A: Adapter>(
    adapter: &A,
    op: Operation,
    req: &ExecRequest,
    bytes: &[u8],
    deterministic: bool,
) -> Result<Computed<A::Model>, String> {
    let tool = req.tool_label();
    let mut ctx = RunContext::for_request(deterministic, bytes, &tool, &req.params_digest());
    let model = if req.input_model.is_some() {
        adapter.load_model(bytes).map_err(|e| e.message)?
    } else {
        adapter.empty_model()
    };
    let params = req.params.clone().unwrap_or_else(|| json!({}));
    match op {
        Operation::Query => {
            let logical = match (&req.tool_name, &req.code_batch) {
                (Some(t), _) => {
                    if !adapter.is_query_tool(t) {
                        return Err(format!("{t} is not a query tool; use /create or /modify"));
                    }
                    adapter.run_query(t, &params, &model).map_err(|e| e.message)?
                }
                (None, Some(ops)) => {
                    let mut scratch = model.clone();
                    let out = adapter.run_batch(ops, &mut scratch, &mut ctx).map_err(|e| e.message)?;
                    if !adapter.diff(&model, &scratch).is_empty() {
                        return Err("query batches must not modify the model".into());
                    }
                    out.unwrap_or(Value::Null)
                }
                (None, None) => return Err("query needs toolName or codeBatch".into()),
            };
            Ok(Computed { ctx, logical: Some(logical), models: None })
        }
        Operation::Create | Operation::Modify => {
            if adapter.is_query_tool(&tool) {
                return Err(format!("{tool} is read only; send it to /query"));
            }
            let mut new = model.clone();
            let logical = adapter.run_high_level(&tool, &params, &mut new, &mut ctx).map_err(|e| e.message)?;
            adapter.validate(&new).map_err(|e| e.message)?;
            Ok(Computed { ctx, logical, models: Some((model, new)) })
        }
    }
}

struct AppState<A: Adapter> {
    exec: Executor<A>,
}

async fn endpoint<A: Adapter>(
    state: Arc<AppState<A>>,
    ep: Endpoint,
    body: Result<Json<Value>, JsonRejection>,
) -> Response {
    let Json(body) = match body {
        Ok(b) => b,
        Err(e) => return (StatusCode::BAD_REQUEST, Json(json!({ "error": e.body_text() }))).into_response(),
    };
    match state.exec.handle(ep, &body).await {
        Ok(artifact) => Json(artifact).into_response(),
        Err(Rejection::Invalid(violations)) => {
            (StatusCode::UNPROCESSABLE_ENTITY, Json(json!({ "violations": violations }))).into_response()
        }
        Err(Rejection::Malformed(msg)) => {
            (StatusCode::UNPROCESSABLE_ENTITY, Json(json!({ "error": msg }))).into_response()
        }
    }
}

pub fn router_with<A: Adapter>(exec: Executor<A>) -> Router {
    let state = Arc::new(AppState { exec });
    let route = |ep: Endpoint| {
        post(move |State(s): State<Arc<AppState<A>>>, body: Result<Json<Value>, JsonRejection>| endpoint(s, ep, body))
    };
    Router::new()
        .route("/healthz", get(|| async { "ok" }))
        .route(Endpoint::Create.path(), route(Endpoint::Create))
        .route(Endpoint::Modify.path(), route(Endpoint::Modify))
        .route(Endpoint::Query.path(), route(Endpoint::Query))
        .with_state(state)
}

/// Router for the native backend.
pub fn router(config: ExecConfig) -> Router {
    router_with(Executor::new(NativeAdapter, config).0)
}

/// A running executor; dropping it shuts the listener down.
pub struct ExecServer {
    pub addr: SocketAddr,
    pub base_url: String,
    io_log: Option<Arc<Mutex<Vec<IoRecord>>>>,
    shutdown: Option<oneshot::Sender<()>>,
    task: Option<JoinHandle<()>>,
}

impl ExecServer {
    /// Presigned URL calls made so far, when the server records I/O.
    pub fn io_log(&self) -> Vec<IoRecord> {
        self.io_log.as_ref().map(|l| l.lock().unwrap().clone()).unwrap_or_default()
    }

    pub fn clear_io_log(&self) {
        if let Some(l) = &self.io_log {
            l.lock().unwrap().clear();
        }
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

impl Drop for ExecServer {
    fn drop(&mut self) {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
    }
}

pub async fn serve_adapter<A: Adapter>(adapter: A, config: ExecConfig) -> std::io::Result<ExecServer> {
    if let Some(dir) = &config.scratch_dir {
        std::fs::create_dir_all(dir)?;
    }
    let addr = config.addr;
    let (exec, io_log) = Executor::new(adapter, config);
    let (addr, shutdown, task) = spawn_router(router_with(exec), addr).await?;
    Ok(ExecServer { addr, base_url: format!("http://{addr}"), io_log, shutdown: Some(shutdown), task: Some(task) })
}

/// Serves the native backend in a background task.
pub async fn serve(config: ExecConfig) -> std::io::Result<ExecServer> {
    serve_adapter(NativeAdapter, config).await
}
