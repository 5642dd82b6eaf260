//! Run the object store until Ctrl-C.
//!
//! STORE_SECRET=dev STORE_ROOT=./data/store cargo run --example serve_store

use bimcp::store::{serve, StoreConfig};

#[tokio::main]
async fn main() -> Result<(), Box<dyn std::error::Error>> {
    let server = serve(StoreConfig::from_env()?).await?;
    println!("store listening on {}", server.base_url);
    tokio::signal::ctrl_c().await?;
    server.shutdown().await;
    Ok(())
}
