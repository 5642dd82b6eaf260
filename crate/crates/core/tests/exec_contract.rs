use bimcp::exec::contract::{run_contract, ContractTarget};
use bimcp::exec::{serve, ExecClient, ExecConfig, ExecServer};
use bimcp::schemas::{Endpoint, ModelRef};
use bimcp::store::{self, Method, StoreClient, StoreConfig, StoreServer};
use serde_json::json;

const SECRET: &str = "contract-secret";

async fn stack(
    deterministic: bool,
    scratch: Option<std::path::PathBuf>,
) -> (tempfile::TempDir, StoreServer, ExecServer, StoreClient) {
    let dir = tempfile::tempdir().unwrap();
    let store = store::serve(StoreConfig::new(dir.path().join("store"), SECRET)).await.unwrap();
    let cfg = ExecConfig { deterministic, record_io: true, scratch_dir: scratch, ..ExecConfig::default() };
    let exec = serve(cfg).await.unwrap();
    let client = StoreClient::new(store.base_url.clone(), SECRET);
    (dir, store, exec, client)
}

fn report(cases: &[bimcp::exec::contract::ContractCase]) -> Vec<String> {
    cases.iter().filter(|c| !c.passed).map(|c| format!("{}: {}", c.name, c.detail)).collect()
}

#[tokio::test]
async fn native_backend_passes_the_contract() {
    let (_dir, _store, exec, store) = stack(true, None).await;
    let client = ExecClient::new(exec.base_url.clone());
    let target = ContractTarget {
        exec: &client,
        store: &store,
        bucket: "models",
        prefix: "contract".into(),
        deterministic: true,
    };
    let cases = run_contract(&target).await;
    assert!(cases.len() >= 10);
    let failed = report(&cases);
    assert!(failed.is_empty(), "{failed:#?}");
}

#[tokio::test]
async fn native_backend_passes_without_determinism() {
    let (_dir, _store, exec, store) = stack(false, None).await;
    let client = ExecClient::new(exec.base_url.clone());
    let target =
        ContractTarget { exec: &client, store: &store, bucket: "models", prefix: "nd".into(), deterministic: false };
    let failed = report(&run_contract(&target).await);
    assert!(failed.is_empty(), "{failed:#?}");
}

/// Runs the suite against an executor started elsewhere, e.g. another backend.
/// Set EXEC_CONTRACT_URL, STORE_URL and STORE_SECRET to enable.
#[tokio::test]
async fn external_backend_passes_the_contract() {
    let Ok(url) = std::env::var("EXEC_CONTRACT_URL") else {
        eprintln!("EXEC_CONTRACT_URL not set; skipping external backend");
        return;
    };
    let store = StoreClient::from_env().expect("STORE_URL and STORE_SECRET");
    let client = ExecClient::new(url);
    let deterministic = std::env::var("EXEC_CONTRACT_DETERMINISTIC").is_ok();
    let prefix = format!("contract-{}", ulid::Ulid::new());
    let target = ContractTarget { exec: &client, store: &store, bucket: "models", prefix, deterministic };
    let failed = report(&run_contract(&target).await);
    assert!(failed.is_empty(), "{failed:#?}");
}

#[tokio::test]
async fn executor_touches_only_the_presigned_urls() {
    let scratch = tempfile::tempdir().unwrap();
    let (_dir, _store, exec, store) = stack(false, Some(scratch.path().to_path_buf())).await;
    let client = ExecClient::new(exec.base_url.clone());
    let put = store.presign(Method::Post, "models", "iso/a.ifc", None, 60).unwrap();
    let (_, body) = client
        .post_raw(
            Endpoint::Create,
            &json!({"toolName": "create_project", "params": {"name": "I"}, "outputTarget": put}),
        )
        .await
        .unwrap();
    let r: ModelRef = serde_json::from_value(body["fileRef"].clone()).unwrap();
    let get = store.presign_get(&r, 60).unwrap();
    let put2 = store.presign(Method::Post, "models", "iso/a.ifc", None, 60).unwrap();
    client
        .post_raw(
            Endpoint::Modify,
            &json!({"toolName": "add_storey", "params": {"name": "L", "elevation": 0}, "inputModel": get, "outputTarget": put2}),
        )
        .await
        .unwrap();
    let log = exec.io_log();
    let calls: Vec<(&str, &str)> = log.iter().map(|r| (r.method.as_str(), r.url.as_str())).collect();
    assert_eq!(calls, vec![("POST", put.as_str()), ("GET", get.as_str()), ("POST", put2.as_str())]);
    assert!(log.iter().all(|r| r.status == 200));
    assert_eq!(std::fs::read_dir(scratch.path()).unwrap().count(), 0, "scratch files left behind");
}

#[tokio::test]
async fn deterministic_mode_is_byte_stable_across_servers() {
    let mut outputs = Vec::new();
    for _ in 0..2 {
        let (_dir, _store, exec, store) = stack(true, None).await;
        let client = ExecClient::new(exec.base_url.clone());
        let put = store.presign(Method::Post, "models", "d.ifc", None, 60).unwrap();
        let (_, body) = client
            .post_raw(
                Endpoint::Create,
                &json!({"toolName": "create_project", "params": {"name": "D"}, "outputTarget": put}),
            )
            .await
            .unwrap();
        let r: ModelRef = serde_json::from_value(body["fileRef"].clone()).unwrap();
        outputs.push(store.get_ref(&r).await.unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
}

#[tokio::test]
async fn slow_requests_time_out_without_writing() {
    let (_dir, store_srv, exec, store) = stack(false, None).await;
    // A listener that accepts and never answers stands in for a stalled download.
    let stall = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let stall_addr = stall.local_addr().unwrap();
    tokio::spawn(async move {
        let mut held = Vec::new();
        while let Ok((s, _)) = stall.accept().await {
            held.push(s);
        }
    });
    let real = store.presign(Method::Get, "models", "t.ifc", Some("01J0000000000000000000000A"), 60).unwrap();
    let stalled = real.replace(&store_srv.base_url, &format!("http://{stall_addr}"));
    let put = store.presign(Method::Post, "models", "t.ifc", None, 60).unwrap();
    let client = ExecClient::new(exec.base_url.clone());
    let started = std::time::Instant::now();
    let (_, body) = client
        .post_raw(
            Endpoint::Modify,
            &json!({"toolName": "add_storey", "params": {"name": "L", "elevation": 0}, "inputModel": stalled, "outputTarget": put, "timeoutSec": 1}),
        )
        .await
        .unwrap();
    assert!(started.elapsed() < std::time::Duration::from_secs(5));
    assert_eq!(body["status"], json!("error"));
    assert!(body["errorMessage"].as_str().unwrap().contains("time limit"));
    assert!(store.list_versions("models", "t.ifc").await.map(|v| v.is_empty()).unwrap_or(true));
}

/// Native backend with a broken diff, to show the suite notices.
struct BlindDiff;

impl bimcp::exec::Adapter for BlindDiff {
    type Model = bimcp::ifc::IfcModel;
    fn backend_id(&self) -> &str {
        "blind-diff"
    }
    fn empty_model(&self) -> Self::Model {
        bimcp::exec::NativeAdapter.empty_model()
    }
    fn load_model(&self, bytes: &[u8]) -> Result<Self::Model, bimcp::exec::AdapterError> {
        bimcp::exec::NativeAdapter.load_model(bytes)
    }
    fn save_model(&self, model: &Self::Model, ctx: &bimcp::exec::RunContext) -> Vec<u8> {
        bimcp::exec::NativeAdapter.save_model(model, ctx)
    }
    fn is_query_tool(&self, tool: &str) -> bool {
        bimcp::exec::NativeAdapter.is_query_tool(tool)
    }
    fn run_high_level(
        &self,
        tool: &str,
        params: &serde_json::Value,
        model: &mut Self::Model,
        ctx: &mut bimcp::exec::RunContext,
    ) -> Result<Option<serde_json::Value>, bimcp::exec::AdapterError> {
        bimcp::exec::NativeAdapter.run_high_level(tool, params, model, ctx)
    }
    fn run_batch(
        &self,
        ops: &[serde_json::Value],
        model: &mut Self::Model,
        ctx: &mut bimcp::exec::RunContext,
    ) -> Result<Option<serde_json::Value>, bimcp::exec::AdapterError> {
        bimcp::exec::NativeAdapter.run_batch(ops, model, ctx)
    }
    fn run_query(
        &self,
        tool: &str,
        params: &serde_json::Value,
        model: &Self::Model,
    ) -> Result<serde_json::Value, bimcp::exec::AdapterError> {
        bimcp::exec::NativeAdapter.run_query(tool, params, model)
    }
    fn diff(&self, _old: &Self::Model, _new: &Self::Model) -> bimcp::schemas::DiffRaw {
        bimcp::schemas::DiffRaw::new(Vec::new())
    }
}

#[tokio::test]
async fn contract_catches_a_broken_backend() {
    let dir = tempfile::tempdir().unwrap();
    let store_srv = store::serve(StoreConfig::new(dir.path(), SECRET)).await.unwrap();
    let exec = bimcp::exec::serve_adapter(BlindDiff, ExecConfig::default()).await.unwrap();
    let store = StoreClient::new(store_srv.base_url.clone(), SECRET);
    let client = ExecClient::new(exec.base_url.clone());
    let target = ContractTarget {
        exec: &client,
        store: &store,
        bucket: "models",
        prefix: "broken".into(),
        deterministic: false,
    };
    let cases = run_contract(&target).await;
    let failed: Vec<&str> = cases.iter().filter(|c| !c.passed).map(|c| c.name).collect();
    assert!(failed.contains(&"create_then_modify"), "{cases:#?}");
}
