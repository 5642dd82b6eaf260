//! Starts the store, the native executor and the MCP server side by side.

use std::path::PathBuf;

use crate::exec::{serve, ExecConfig, ExecServer};
use crate::mcp::{self, McpConfig, McpServer};
use crate::store::{self, StoreClient, StoreConfig, StoreServer};

#[derive(Debug, Clone)]
pub struct StackOptions {
    pub store_root: PathBuf,
    pub secret: String,
    pub deterministic: bool,
    pub record_outbound: bool,
    pub chat_budget: usize,
}

impl StackOptions {
    pub fn new(store_root: impl Into<PathBuf>) -> Self {
        Self {
            store_root: store_root.into(),
            secret: "local-stack-secret".into(),
            deterministic: false,
            record_outbound: false,
            chat_budget: crate::schemas::DEFAULT_BUDGET,
        }
    }
}

pub struct Stack {
    pub store: StoreServer,
    pub exec: ExecServer,
    pub mcp: McpServer,
    secret: String,
}

impl Stack {
    /// Binds all three services on ephemeral local ports.
    pub async fn start(opts: StackOptions) -> std::io::Result<Self> {
        let store = store::serve(StoreConfig::new(&opts.store_root, &opts.secret)).await?;
        let exec = serve(ExecConfig { deterministic: opts.deterministic, ..Default::default() }).await?;
        let mut mc = McpConfig::new(&exec.base_url, &store.base_url, &opts.secret);
        mc.chat_budget = opts.chat_budget;
        mc.record_outbound = opts.record_outbound;
        let mcp = mcp::serve(mc).await?;
        Ok(Self { store, exec, mcp, secret: opts.secret })
    }

    pub fn store_client(&self) -> StoreClient {
        StoreClient::new(&self.store.base_url, &self.secret)
    }

    pub fn mcp_url(&self) -> String {
        self.mcp.endpoint()
    }

    pub async fn shutdown(self) {
        self.mcp.shutdown().await;
        self.exec.shutdown().await;
        self.store.shutdown().await;
    }
}
