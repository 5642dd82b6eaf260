//! Run the MCP server against an already running store and executor.
//!
//! EXEC_URL=http://127.0.0.1:9200 STORE_URL=http://127.0.0.1:9100 STORE_SECRET=dev \
//!     cargo run --example serve_mcp

use bimcp::mcp::{serve, McpConfig};

#[tokio::main]
async fn main() -> Result<(), Box<dyn std::error::Error>> {
    let server = serve(McpConfig::from_env()?).await?;
    println!("mcp endpoint {}", server.endpoint());
    tokio::signal::ctrl_c().await?;
    server.shutdown().await;
    Ok(())
}
