//! Store, executor and MCP server in one process, on ephemeral ports.
//!
//! cargo run --example serve_stack -- ./data/store

use bimcp::stack::{Stack, StackOptions};

#[tokio::main]
async fn main() -> Result<(), Box<dyn std::error::Error>> {
    let root = std::env::args().nth(1).unwrap_or_else(|| "./data/store".into());
    let mut opts = StackOptions::new(root);
    opts.deterministic = std::env::var("TEST_DETERMINISTIC").is_ok();
    let stack = Stack::start(opts).await?;
    println!("store    {}", stack.store.base_url);
    println!("executor {}", stack.exec.base_url);
    println!("mcp      {}", stack.mcp_url());
    tokio::signal::ctrl_c().await?;
    stack.shutdown().await;
    Ok(())
}
