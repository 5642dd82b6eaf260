//! Replay a bundled test case through a local stack and print the tables.
//!
//! cargo run --example run_scripted_case -- cases/tc_doors_windows.json 3

use std::sync::Arc;

use bimcp::harness::{self, AgentKind, McpClient, RunOptions, TestCase};
use bimcp::stack::{Stack, StackOptions};

#[tokio::main]
async fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let path = args.next().unwrap_or_else(|| concat!(env!("CARGO_MANIFEST_DIR"), "/cases/tc_new_1.json").into());
    let reps: usize = args.next().map(|s| s.parse()).transpose()?.unwrap_or(2);

    let case = TestCase::load(&path)?;
    let dir = tempfile::tempdir()?;
    let mut opts = StackOptions::new(dir.path());
    opts.deterministic = true;
    let stack = Stack::start(opts).await?;
    let client = Arc::new(McpClient::new(stack.mcp_url()));

    let report = harness::run_case(client, &case, &AgentKind::Scripted, &RunOptions { reps, parallel: false }).await?;
    for run in &report.runs {
        for call in &run.transcript.calls {
            println!("  r{} {:<20} {:?} {}", run.metrics.repetition, call.tool, call.status, call.summary);
        }
    }
    println!("{}", harness::render_tables(&[report.summary]).text);
    stack.shutdown().await;
    Ok(())
}
