//! Run the native BIM executor until Ctrl-C.
//!
//! TEST_DETERMINISTIC=1 cargo run --example serve_exec

use bimcp::exec::{serve, ExecConfig};

#[tokio::main]
async fn main() -> Result<(), Box<dyn std::error::Error>> {
    let server = serve(ExecConfig::from_env()?).await?;
    println!("executor listening on {}", server.base_url);
    tokio::signal::ctrl_c().await?;
    server.shutdown().await;
    Ok(())
}
