//! Agents that drive a session: a scripted trace or a chat-completion model.

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::case::TraceStep;
use super::client::{ClientError, McpClient};
use crate::schemas::{ModelRef, Operation, Status};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CallRecord {
    pub tool: String,
    pub arguments: Value,
    pub status: Status,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expected: Option<Status>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub operation: Option<Operation>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub file_ref: Option<ModelRef>,
    /// Summary line, or the protocol error when the call was refused.
    pub summary: String,
    /// Text handed back to the agent.
    #[serde(skip)]
    pub reply: String,
}

impl CallRecord {
    pub fn moved_model(&self) -> bool {
        self.status == Status::Ok && matches!(self.operation, Some(Operation::Create | Operation::Modify))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct AgentRun {
    pub calls: Vec<CallRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tokens_total: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub final_answer: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub messages: Vec<Value>,
}

/// Issues one call. Refused calls become error records; only an
/// unreachable server is returned as an error.
pub async fn call(
    client: &McpClient,
    session: &str,
    tool: &str,
    arguments: &Value,
    expected: Option<Status>,
) -> Result<CallRecord, ClientError> {
    match client.call_tool(session, tool, arguments).await {
        Ok(chat) => Ok(CallRecord {
            tool: tool.to_string(),
            arguments: arguments.clone(),
            status: chat.status,
            expected,
            operation: Some(chat.operation),
            file_ref: chat.file_ref.clone(),
            summary: chat.summary_line.clone(),
            reply: serde_json::to_string(&chat).unwrap_or_default(),
        }),
        Err(e @ (ClientError::Rpc { .. } | ClientError::Protocol(_))) => Ok(CallRecord {
            tool: tool.to_string(),
            arguments: arguments.clone(),
            status: Status::Error,
            expected,
            operation: None,
            file_ref: None,
            summary: e.to_string(),
            reply: json!({"status": "error", "summaryLine": e.to_string()}).to_string(),
        }),
        Err(e) => Err(e),
    }
}

pub async fn run_scripted(client: &McpClient, session: &str, trace: &[TraceStep]) -> Result<AgentRun, ClientError> {
    let mut run = AgentRun::default();
    for step in trace {
        run.calls.push(call(client, session, &step.tool, &step.arguments, Some(step.expect_status)).await?);
    }
    run.final_answer = Some("trace complete".into());
    Ok(run)
}

pub const DEFAULT_STEP_CAP: usize = 40;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LlmConfig {
    /// Full URL of an OpenAI-style chat completions endpoint.
    pub api_url: String,
    pub api_key: Option<String>,
    pub model: String,
    pub step_cap: usize,
}

impl LlmConfig {
    /// Reads LLM_API_URL, LLM_API_KEY, LLM_MODEL and STEP_CAP.
    pub fn from_env() -> Result<Self, String> {
        let api_url =
            std::env::var("LLM_API_URL").map_err(|_| "LLM_API_URL must be set for --agent llm".to_string())?;
        let step_cap = match std::env::var("STEP_CAP") {
            Ok(s) => s.parse().map_err(|e| format!("STEP_CAP: {e}"))?,
            Err(_) => DEFAULT_STEP_CAP,
        };
        Ok(Self {
            api_url,
            api_key: std::env::var("LLM_API_KEY").ok().filter(|k| !k.is_empty()),
            model: std::env::var("LLM_MODEL").unwrap_or_else(|_| "default".into()),
            step_cap,
        })
    }
}

pub const SYSTEM_PROMPT: &str = "You are a BIM modelling agent. You change and inspect an IFC model only through the \
provided tools. Work step by step: call one tool, read its result, then decide the next call. The session keeps the \
current model between calls. When the task is complete, answer with a short summary and no tool call.";

/// Tool descriptors in chat-completion function form.
pub fn function_tools(tools: &[Value]) -> Vec<Value> {
    tools
        .iter()
        .map(|t| {
            let mut params = t["inputSchema"].clone();
            if let Some(o) = params.as_object_mut() {
                o.remove("examples");
            }
            json!({"type": "function", "function": {"name": t["name"], "description": t["description"], "parameters": params}})
        })
        .collect()
}

#[derive(Debug, thiserror::Error)]
pub enum LlmError {
    #[error(transparent)]
    Mcp(#[from] ClientError),
    #[error("model endpoint: {0}")]
    Endpoint(String),
}

/// Reason, call, observe, until the model answers without a tool call or the cap is hit.
pub async fn run_react(cfg: &LlmConfig, client: &McpClient, session: &str, prompt: &str) -> Result<AgentRun, LlmError> {
    let http = reqwest::Client::new();
    let tools = function_tools(&client.list_tools().await?);
    let mut run = AgentRun::default();
    let mut tokens = 0u64;
    let mut messages =
        vec![json!({"role": "system", "content": SYSTEM_PROMPT}), json!({"role": "user", "content": prompt})];
    let mut finished = false;
    for _ in 0..cfg.step_cap {
        let mut req = http.post(&cfg.api_url).json(&json!({"model": cfg.model, "messages": messages, "tools": tools}));
        if let Some(k) = &cfg.api_key {
            req = req.bearer_auth(k);
        }
        let resp = req.send().await.map_err(|e| LlmError::Endpoint(e.to_string()))?;
        if !resp.status().is_success() {
            let status = resp.status();
            return Err(LlmError::Endpoint(format!("HTTP {status}: {}", resp.text().await.unwrap_or_default())));
        }
        let body: Value = resp.json().await.map_err(|e| LlmError::Endpoint(e.to_string()))?;
        tokens += body["usage"]["total_tokens"].as_u64().unwrap_or(0);
        let msg = body["choices"][0]["message"].clone();
        if !msg.is_object() {
            return Err(LlmError::Endpoint(format!("reply without a message: {body}")));
        }
        messages.push(msg.clone());
        let calls = msg["tool_calls"].as_array().cloned().unwrap_or_default();
        if calls.is_empty() {
            run.final_answer = msg["content"].as_str().map(str::to_string);
            finished = true;
            break;
        }
        for c in calls {
            let name = c["function"]["name"].as_str().unwrap_or_default().to_string();
            let raw = c["function"]["arguments"].as_str().unwrap_or("{}");
            let args: Value = serde_json::from_str(raw).unwrap_or_else(|_| json!({}));
            let rec = call(client, session, &name, &args, None).await?;
            messages.push(json!({"role": "tool", "tool_call_id": c["id"], "content": rec.reply}));
            run.calls.push(rec);
        }
    }
    if !finished {
        run.failure = Some(format!("step cap of {} reached without a final answer", cfg.step_cap));
    }
    run.tokens_total = Some(tokens);
    run.messages = messages;
    Ok(run)
}
