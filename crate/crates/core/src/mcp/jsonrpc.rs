//! JSON-RPC 2.0 framing: request validation, batches and notifications.

use std::future::Future;

use serde_json::{json, Value};

pub const PARSE_ERROR: i64 = -32700;
pub const INVALID_REQUEST: i64 = -32600;
pub const METHOD_NOT_FOUND: i64 = -32601;
pub const INVALID_PARAMS: i64 = -32602;
pub const INTERNAL_ERROR: i64 = -32603;

#[derive(Debug, Clone, PartialEq)]
pub struct RpcError {
    pub code: i64,
    pub message: String,
    pub data: Option<Value>,
}

impl RpcError {
    pub fn new(code: i64, message: impl Into<String>) -> Self {
        Self { code, message: message.into(), data: None }
    }

    pub fn with_data(mut self, data: Value) -> Self {
        self.data = Some(data);
        self
    }

    pub fn method_not_found(method: &str) -> Self {
        Self::new(METHOD_NOT_FOUND, format!("method not found: {method}"))
    }

    pub fn invalid_params(message: impl Into<String>) -> Self {
        Self::new(INVALID_PARAMS, message)
    }

    fn to_value(&self) -> Value {
        let mut e = json!({"code": self.code, "message": self.message});
        if let Some(d) = &self.data {
            e["data"] = d.clone();
        }
        e
    }
}

/// A validated call. `id` is `None` for notifications.
#[derive(Debug, Clone, PartialEq)]
pub struct Request {
    pub id: Option<Value>,
    pub method: String,
    pub params: Value,
}

impl Request {
    pub fn is_notification(&self) -> bool {
        self.id.is_none()
    }
}

pub fn success(id: Value, result: Value) -> Value {
    json!({"jsonrpc": "2.0", "id": id, "result": result})
}

pub fn failure(id: Value, error: &RpcError) -> Value {
    json!({"jsonrpc": "2.0", "id": id, "error": error.to_value()})
}

fn valid_id(id: &Value) -> bool {
    matches!(id, Value::String(_) | Value::Number(_) | Value::Null)
}

/// Checks one message. On failure returns the id to answer with (null when unusable).
pub fn parse_request(msg: &Value) -> Result<Request, (Value, RpcError)> {
    let Some(obj) = msg.as_object() else {
        return Err((Value::Null, RpcError::new(INVALID_REQUEST, "request must be an object")));
    };
    let id = obj.get("id").cloned();
    let reply_id = id.clone().filter(valid_id).unwrap_or(Value::Null);
    let invalid = |m: &str| Err((reply_id.clone(), RpcError::new(INVALID_REQUEST, m)));
    if id.as_ref().is_some_and(|i| !valid_id(i)) {
        return invalid("id must be a string, number or null");
    }
    if obj.get("jsonrpc") != Some(&json!("2.0")) {
        return invalid("jsonrpc must be \"2.0\"");
    }
    let Some(method) = obj.get("method").and_then(Value::as_str) else {
        return invalid("method must be a string");
    };
    let params = match obj.get("params") {
        None => Value::Object(Default::default()),
        Some(p @ (Value::Object(_) | Value::Array(_))) => p.clone(),
        Some(_) => return invalid("params must be an object or an array"),
    };
    Ok(Request { id, method: method.to_string(), params })
}

/// Answers `body`, calling `handler` for each request in order.
///
/// Returns `None` when nothing needs to be sent back (only notifications).
pub async fn dispatch<F, Fut>(body: &[u8], handler: F) -> Option<Value>
where
    F: Fn(Request) -> Fut,
    Fut: Future<Output = Result<Value, RpcError>>,
{
    let msg: Value = match serde_json::from_slice(body) {
        Ok(v) => v,
        Err(e) => return Some(failure(Value::Null, &RpcError::new(PARSE_ERROR, format!("parse error: {e}")))),
    };
    match msg {
        Value::Array(items) if items.is_empty() => {
            Some(failure(Value::Null, &RpcError::new(INVALID_REQUEST, "empty batch")))
        }
        Value::Array(items) => {
            let mut out = Vec::new();
            for item in &items {
                if let Some(r) = answer(item, &handler).await {
                    out.push(r);
                }
            }
            (!out.is_empty()).then_some(Value::Array(out))
        }
        single => answer(&single, &handler).await,
    }
}

async fn answer<F, Fut>(msg: &Value, handler: &F) -> Option<Value>
where
    F: Fn(Request) -> Fut,
    Fut: Future<Output = Result<Value, RpcError>>,
{
    let req = match parse_request(msg) {
        Ok(r) => r,
        Err((id, e)) => return Some(failure(id, &e)),
    };
    let id = req.id.clone();
    let result = handler(req).await;
    let id = id?;
    Some(match result {
        Ok(v) => success(id, v),
        Err(e) => failure(id, &e),
    })
}
