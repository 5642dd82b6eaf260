//! The agent-facing MCP endpoint.

pub mod docs;
pub mod jsonrpc;
pub mod server;
pub mod service;
pub mod session;

pub use server::{router, serve, McpServer};
pub use service::{descriptor, tool_result, McpConfig, McpService, PROTOCOL_VERSION};
pub use session::{SessionState, DEFAULT_SESSION};
