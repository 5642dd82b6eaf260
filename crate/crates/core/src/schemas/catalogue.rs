//! The bundled tool catalogue shared by the executor and the MCP server.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::types::Operation;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ToolCategory {
    BimLow,
    BimHigh,
    Storage,
    Knowledge,
}

impl ToolCategory {
    pub const ALL: [ToolCategory; 4] =
        [ToolCategory::BimLow, ToolCategory::BimHigh, ToolCategory::Storage, ToolCategory::Knowledge];
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ToolSpec {
    pub name: String,
    pub category: ToolCategory,
    pub description: String,
    pub input_schema: Value,
    /// Executor endpoint for BIM tools; storage and knowledge tools have none.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub endpoint: Option<Operation>,
}

impl ToolSpec {
    pub fn is_bim(&self) -> bool {
        matches!(self.category, ToolCategory::BimLow | ToolCategory::BimHigh)
    }

    /// Examples embedded in the input schema.
    pub fn examples(&self) -> &[Value] {
        self.input_schema.get("examples").and_then(Value::as_array).map(Vec::as_slice).unwrap_or(&[])
    }
}

const TOOLS_JSON: &str = include_str!("../../schemas/tools.json");

pub fn tool_catalogue() -> &'static [ToolSpec] {
    static TOOLS: OnceLock<Vec<ToolSpec>> = OnceLock::new();
    TOOLS.get_or_init(|| serde_json::from_str(TOOLS_JSON).expect("bundled tools.json is valid"))
}

pub fn find_tool(name: &str) -> Option<&'static ToolSpec> {
    tool_catalogue().iter().find(|t| t.name == name)
}
