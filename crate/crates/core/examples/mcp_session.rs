//! A short session over MCP: each call works on the model the previous one produced.
//!
//! Starts its own stack unless MCP_URL is set.

use bimcp::harness::McpClient;
use bimcp::stack::{Stack, StackOptions};
use serde_json::json;

#[tokio::main]
async fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = tempfile::tempdir()?;
    let (client, stack) = match std::env::var("MCP_URL") {
        Ok(url) => (McpClient::new(url), None),
        Err(_) => {
            let stack = Stack::start(StackOptions::new(dir.path())).await?;
            (McpClient::new(stack.mcp_url()), Some(stack))
        }
    };
    let info = client.initialize().await?;
    println!("server: {}", info["serverInfo"]);
    println!("{} tools", client.list_tools().await?.len());

    let session = "example";
    let calls = [
        ("create_project", json!({"name": "Demo"})),
        ("add_storey", json!({"name": "Ground", "elevation": 0})),
        (
            "create_wall",
            json!({"storeyRef": "Ground", "start": [0, 0], "end": [5, 0], "height": 3, "thickness": 0.2, "name": "A"}),
        ),
        ("add_door", json!({"wallRef": "A", "offsetAlongWall": 1.5, "width": 0.9, "height": 2.1})),
        ("add_door", json!({"wallRef": "A", "offsetAlongWall": 4.5, "width": 2.0, "height": 2.1})),
        ("query_elements", json!({"selector": "IfcDoor"})),
    ];
    let mut last = None;
    for (tool, args) in calls {
        let chat = client.call_tool(session, tool, &args).await?;
        println!("{:?} {}", chat.status, chat.summary_line);
        if chat.is_ok() && chat.file_ref.is_some() {
            last = chat.file_ref.clone();
        }
    }
    if let Some(r) = last {
        let bytes = client.fetch_model(session, &r).await?;
        println!("final model {r}: {} bytes", bytes.len());
    }
    if let Some(s) = stack {
        s.shutdown().await;
    }
    Ok(())
}
