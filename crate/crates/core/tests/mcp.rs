use std::collections::BTreeSet;

use bimcp::mcp::jsonrpc::{INVALID_PARAMS, INVALID_REQUEST, METHOD_NOT_FOUND, PARSE_ERROR};
use bimcp::mcp::{McpConfig, McpService};
use bimcp::schemas::{tool_catalogue, validate_request, ChatArtifact, Endpoint, ModelRef, Operation, Status};
use bimcp::stack::{Stack, StackOptions};
use bimcp::store::sign::parse_object_url;
use rand::{Rng, SeedableRng};
use serde_json::{json, Value};

/// A service whose executor and store are unreachable; enough for protocol tests.
fn offline() -> McpService {
    McpService::new(McpConfig::new("http://127.0.0.1:9", "http://127.0.0.1:9", "s"))
}

async fn rpc(svc: &McpService, raw: &str) -> Option<Value> {
    svc.handle_body(raw.as_bytes(), None).await
}

fn code(v: &Value) -> i64 {
    v["error"]["code"].as_i64().unwrap_or_else(|| panic!("not an error: {v}"))
}

#[tokio::test]
async fn json_rpc_vectors() {
    let s = offline();
    let r = rpc(&s, r#"{"jsonrpc":"2.0","method":"ping","id":1"#).await.unwrap();
    assert_eq!((code(&r), &r["id"]), (PARSE_ERROR, &Value::Null));
    let r = rpc(&s, r#"[{"jsonrpc":"2.0","method":"ping","id":1},{"jsonrpc":"2.0","method""#).await.unwrap();
    assert_eq!(code(&r), PARSE_ERROR);

    let r = rpc(&s, r#"{"id":1,"method":"initialize"}"#).await.unwrap();
    assert_eq!((code(&r), &r["id"]), (INVALID_REQUEST, &json!(1)));
    let r = rpc(&s, r#"{"jsonrpc":"1.0","id":"a","method":"ping"}"#).await.unwrap();
    assert_eq!((code(&r), &r["id"]), (INVALID_REQUEST, &json!("a")));
    let r = rpc(&s, r#"{"jsonrpc":"2.0","id":2,"method":1}"#).await.unwrap();
    assert_eq!(code(&r), INVALID_REQUEST);
    let r = rpc(&s, r#"{"jsonrpc":"2.0","id":3,"method":"ping","params":"x"}"#).await.unwrap();
    assert_eq!(code(&r), INVALID_REQUEST);
    let r = rpc(&s, r#"{"jsonrpc":"2.0","id":{"a":1},"method":"ping"}"#).await.unwrap();
    assert_eq!((code(&r), &r["id"]), (INVALID_REQUEST, &Value::Null));
    let r = rpc(&s, "1").await.unwrap();
    assert_eq!(code(&r), INVALID_REQUEST);

    let r = rpc(&s, "[]").await.unwrap();
    assert!(r.is_object());
    assert_eq!(code(&r), INVALID_REQUEST);
    let r = rpc(&s, "[1,2,3]").await.unwrap();
    let items = r.as_array().unwrap();
    assert_eq!(items.len(), 3);
    assert!(items.iter().all(|i| code(i) == INVALID_REQUEST && i["id"].is_null()));

    let r = rpc(&s, r#"{"jsonrpc":"2.0","id":4,"method":"resources/list"}"#).await.unwrap();
    assert_eq!((code(&r), &r["id"]), (METHOD_NOT_FOUND, &json!(4)));

    assert!(rpc(&s, r#"{"jsonrpc":"2.0","method":"notifications/initialized"}"#).await.is_none());
    assert!(rpc(&s, r#"{"jsonrpc":"2.0","method":"no_such_method"}"#).await.is_none());
    let all_notes = r#"[{"jsonrpc":"2.0","method":"notifications/initialized"},{"jsonrpc":"2.0","method":"ping"}]"#;
    assert!(rpc(&s, all_notes).await.is_none());

    let r = rpc(&s, r#"{"jsonrpc":"2.0","id":null,"method":"ping"}"#).await.unwrap();
    assert_eq!((&r["id"], &r["result"]), (&Value::Null, &json!({})));

    let batch = r#"[
        {"jsonrpc":"2.0","id":"x","method":"initialize","params":{"clientInfo":{"name":"t"}}},
        {"jsonrpc":"2.0","method":"notifications/initialized"},
        {"jsonrpc":"2.0","id":7,"method":"initialize"},
        {"jsonrpc":"2.0","id":8,"method":"nope"}
    ]"#;
    let r = rpc(&s, batch).await.unwrap();
    let items = r.as_array().unwrap();
    assert_eq!(items.len(), 3);
    assert_eq!(items[0]["id"], json!("x"));
    assert_eq!(items[1]["id"], json!(7));
    for i in &items[..2] {
        assert_eq!(i["jsonrpc"], "2.0");
        assert!(!i["result"]["protocolVersion"].as_str().unwrap().is_empty());
        assert!(i["result"]["capabilities"]["tools"].is_object());
        assert!(i.get("error").is_none());
    }
    assert_eq!(code(&items[2]), METHOD_NOT_FOUND);
}

fn expected_names() -> BTreeSet<&'static str> {
    [
        "create_project",
        "georeference",
        "create_wall",
        "add_storey",
        "add_door",
        "add_window",
        "create_slab",
        "set_property",
        "delete_elements",
        "query_elements",
        "spatial_tree",
        "run_batch",
        "upload_model",
        "download_model",
        "list_model_versions",
        "lookup_docs",
    ]
    .into_iter()
    .collect()
}

#[tokio::test]
async fn tools_list_is_complete_stable_and_self_valid() {
    let s = offline();
    let list = |id: i64| json!({"jsonrpc":"2.0","id":id,"method":"tools/list"});
    let a = s.handle_value(&list(1)).await.unwrap();
    let b = s.handle_value(&list(2)).await.unwrap();
    assert_eq!(a["result"], b["result"]);
    let tools = a["result"]["tools"].as_array().unwrap();
    let names: BTreeSet<&str> = tools.iter().map(|t| t["name"].as_str().unwrap()).collect();
    assert_eq!(names.len(), tools.len());
    assert_eq!(names, expected_names());

    let cats = ["bim_low", "bim_high", "storage", "knowledge"];
    for t in tools {
        assert!(!t["description"].as_str().unwrap().is_empty());
        let cat = t["category"].as_str().unwrap();
        assert_eq!(cats.iter().filter(|c| **c == cat).count(), 1, "{t}");
        // Independent validator from the dev dependencies.
        let schema = &t["inputSchema"];
        let v = jsonschema::validator_for(schema).unwrap_or_else(|e| panic!("{}: {e}", t["name"]));
        let examples = schema["examples"].as_array().unwrap();
        assert!(!examples.is_empty());
        for ex in examples {
            assert!(v.is_valid(ex), "{} example {ex}", t["name"]);
        }
    }
}

#[tokio::test]
async fn catalogue_closure_and_argument_errors() {
    let s = offline();
    for (i, t) in tool_catalogue().iter().enumerate() {
        let call = json!({"jsonrpc":"2.0","id":i,"method":"tools/call",
            "params":{"name":t.name,"arguments":t.examples()[0]}});
        let r = s.handle_value(&call).await.unwrap();
        assert!(r.get("error").is_none(), "{}: {r}", t.name);
        // Nothing is reachable, so every call fails as a tool result.
        let res = &r["result"];
        let text: ChatArtifact = serde_json::from_str(res["content"][0]["text"].as_str().unwrap()).unwrap();
        assert_eq!(serde_json::to_value(&text).unwrap(), res["structuredContent"]);
        if t.name == "lookup_docs" {
            continue;
        }
        assert_eq!(res["isError"], json!(true), "{}: {res}", t.name);
        assert_eq!(text.status, Status::Error);
    }

    let unknown = json!({"jsonrpc":"2.0","id":1,"method":"tools/call","params":{"name":"make_coffee","arguments":{}}});
    let r = s.handle_value(&unknown).await.unwrap();
    assert_eq!(code(&r), INVALID_PARAMS);
    assert!(r["error"]["message"].as_str().unwrap().contains("make_coffee"));

    let missing = json!({"jsonrpc":"2.0","id":2,"method":"tools/call",
        "params":{"name":"create_wall","arguments":{"storeyRef":"Ground","start":[0,0],"end":[5,0],"height":3}}});
    let r = s.handle_value(&missing).await.unwrap();
    assert_eq!(code(&r), INVALID_PARAMS);
    let paths: Vec<&str> =
        r["error"]["data"]["violations"].as_array().unwrap().iter().map(|v| v["path"].as_str().unwrap()).collect();
    assert!(!paths.is_empty());
    assert!(r["error"]["message"].as_str().unwrap().contains("thickness"), "{r}");

    let extra = json!({"jsonrpc":"2.0","id":3,"method":"tools/call",
        "params":{"name":"create_project","arguments":{"name":"P","colour":"red"}}});
    let r = s.handle_value(&extra).await.unwrap();
    assert_eq!(code(&r), INVALID_PARAMS);
    assert!(r["error"]["data"]["violations"][0]["path"].as_str().unwrap().contains("colour"), "{r}");

    let no_name = json!({"jsonrpc":"2.0","id":4,"method":"tools/call","params":{"arguments":{}}});
    assert_eq!(code(&s.handle_value(&no_name).await.unwrap()), INVALID_PARAMS);
    let bad_session = json!({"jsonrpc":"2.0","id":5,"method":"tools/call",
        "params":{"name":"lookup_docs","arguments":{"query":"x"},"sessionId":"../etc"}});
    assert_eq!(code(&s.handle_value(&bad_session).await.unwrap()), INVALID_PARAMS);
}

/// Keyword-overlap ranking computed from the raw corpus file.
fn docs_oracle(query: &str, k: usize) -> Vec<(String, usize)> {
    let raw: Value = serde_json::from_str(include_str!("../schemas/docs.json")).unwrap();
    let word = regex::Regex::new(r"[A-Za-z0-9_]+").unwrap();
    let mut q: Vec<String> = word.find_iter(query).map(|m| m.as_str().to_lowercase()).collect();
    q.sort();
    q.dedup();
    if q.is_empty() {
        return Vec::new();
    }
    let mut scored: Vec<(String, usize)> = raw
        .as_array()
        .unwrap()
        .iter()
        .map(|d| {
            let body = format!("{} {}", d["title"].as_str().unwrap(), d["text"].as_str().unwrap()).to_lowercase();
            let words: Vec<&str> = word.find_iter(&body).map(|m| m.as_str()).collect();
            let s = q.iter().map(|t| words.iter().filter(|w| **w == t.as_str()).count()).sum();
            (d["id"].as_str().unwrap().to_string(), s)
        })
        .collect();
    scored.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    scored.truncate(k);
    scored
}

#[tokio::test]
async fn lookup_docs_matches_the_overlap_oracle() {
    let mut config = McpConfig::new("http://127.0.0.1:9", "http://127.0.0.1:9", "s");
    config.chat_budget = 1 << 20;
    let s = McpService::new(config);
    let queries = [
        ("wall thickness parameter", 3),
        ("door opening in a wall", 5),
        ("GlobalId storey elevation", 50),
        ("WALL wall Wall", 2),
        ("selector syntax for query_elements", 4),
        ("", 5),
        ("   ", 5),
        ("zebra", 1),
    ];
    for (q, k) in queries {
        let chat = s.call_tool("docs", "lookup_docs", &json!({"query": q, "k": k})).await;
        assert!(chat.is_ok());
        let hits = chat.logical_result.unwrap()["results"].as_array().unwrap().clone();
        let got: Vec<(String, usize)> =
            hits.iter().map(|h| (h["id"].as_str().unwrap().into(), h["score"].as_u64().unwrap() as usize)).collect();
        assert_eq!(got, docs_oracle(q, k), "{q:?}");
        assert!(hits.iter().all(|h| h["snippet"].as_str().unwrap().chars().count() <= 512));
    }
    let chat = s.call_tool("docs", "lookup_docs", &json!({"query": "wall thickness parameter"})).await;
    assert_eq!(chat.logical_result.unwrap()["results"][0]["id"], "tool.create_wall");
    let chat = s.call_tool("docs", "lookup_docs", &json!({"query": "wall", "k": 50})).await;
    assert_eq!(chat.logical_result.unwrap()["results"].as_array().unwrap().len(), bimcp::mcp::docs::corpus().len());
}

struct Client {
    http: reqwest::Client,
    url: String,
    next: std::sync::atomic::AtomicU64,
}

impl Client {
    fn new(url: String) -> Self {
        Self { http: reqwest::Client::new(), url, next: 1.into() }
    }

    async fn tool(&self, session: &str, name: &str, args: Value) -> ChatArtifact {
        let id = self.next.fetch_add(1, std::sync::atomic::Ordering::SeqCst);
        let body = json!({"jsonrpc":"2.0","id":id,"method":"tools/call",
            "params":{"name":name,"arguments":args,"sessionId":session}});
        let r: Value = self.http.post(&self.url).json(&body).send().await.unwrap().json().await.unwrap();
        assert_eq!(r["id"], json!(id));
        let res = &r["result"];
        assert!(res.is_object(), "{name}: {r}");
        let chat: ChatArtifact = serde_json::from_value(res["structuredContent"].clone()).unwrap();
        assert_eq!(res["isError"], json!(!chat.is_ok()));
        chat
    }
}

async fn stack(record: bool) -> (tempfile::TempDir, Stack) {
    let dir = tempfile::tempdir().unwrap();
    let mut opts = StackOptions::new(dir.path());
    opts.record_outbound = record;
    (dir, Stack::start(opts).await.unwrap())
}

fn presigned_ref(url: &str) -> ModelRef {
    let (b, k, v) = parse_object_url(url).unwrap();
    ModelRef::new(b, k, v.unwrap())
}

#[tokio::test]
async fn http_transport_rules() {
    let (_d, st) = stack(false).await;
    let http = reqwest::Client::new();
    let url = st.mcp_url();
    let ping = json!({"jsonrpc":"2.0","id":1,"method":"ping"});

    assert_eq!(http.get(&url).send().await.unwrap().status(), 405);
    assert_eq!(http.put(&url).json(&ping).send().await.unwrap().status(), 405);
    let r = http.post(&url).header("content-type", "text/plain").body(ping.to_string()).send().await.unwrap();
    assert_eq!(r.status(), 415);
    let r = http.post(&url).body(ping.to_string()).send().await.unwrap();
    assert_eq!(r.status(), 415);

    let r = http.post(&url).json(&ping).send().await.unwrap();
    assert_eq!(r.status(), 200);
    assert!(r.headers()["content-type"].to_str().unwrap().starts_with("application/json"));
    assert_eq!(r.json::<Value>().await.unwrap()["result"], json!({}));

    let r = http.post(&url).header("accept", "application/json, text/event-stream").json(&ping).send().await.unwrap();
    assert!(r.headers()["content-type"].to_str().unwrap().starts_with("application/json"));

    let r = http.post(&url).header("accept", "text/event-stream").json(&ping).send().await.unwrap();
    assert_eq!(r.status(), 200);
    assert!(r.headers()["content-type"].to_str().unwrap().starts_with("text/event-stream"));
    let text = r.text().await.unwrap();
    let frames: Vec<&str> = text.split("\n\n").filter(|f| !f.is_empty()).collect();
    assert_eq!(frames.len(), 1);
    let data = frames[0].lines().find_map(|l| l.strip_prefix("data: ")).unwrap();
    assert_eq!(serde_json::from_str::<Value>(data).unwrap()["id"], 1);

    let note = json!({"jsonrpc":"2.0","method":"notifications/initialized"});
    let r = http.post(&url).json(&note).send().await.unwrap();
    assert_eq!(r.status(), 202);
    assert!(r.text().await.unwrap().is_empty());

    let r = http.post(&url).header("content-type", "application/json").body("{oops").send().await.unwrap();
    assert_eq!(r.status(), 200);
    assert_eq!(r.json::<Value>().await.unwrap()["error"]["code"], PARSE_ERROR);

    let call =
        json!({"jsonrpc":"2.0","id":2,"method":"tools/call","params":{"name":"lookup_docs","arguments":{"query":"x"}}});
    http.post(&url).header("mcp-session-id", "from-header").json(&call).send().await.unwrap();
    assert!(st.mcp.service.session_ids().contains(&"from-header".to_string()));
    st.shutdown().await;
}

const ALLOWED_FIELDS: [&str; 6] = ["toolName", "codeBatch", "params", "outputTarget", "inputModel", "timeoutSec"];

#[tokio::test]
async fn each_call_consumes_the_previous_file_ref() {
    let (_d, st) = stack(true).await;
    let c = Client::new(st.mcp_url());
    let steps = [
        ("create_project", json!({"name": "Trace"})),
        ("add_storey", json!({"name": "Ground", "elevation": 0.0})),
        ("create_wall", json!({"storeyRef":"Ground","start":[0,0],"end":[6,0],"height":3,"thickness":0.2,"name":"W1"})),
        ("add_door", json!({"wallRef":"W1","offsetAlongWall":1.0,"width":0.9,"height":2.1})),
        ("query_elements", json!({"selector": "IfcWall"})),
        (
            "set_property",
            json!({"selector":"IfcWall","psetName":"Pset_WallCommon","propName":"IsExternal","value":true}),
        ),
    ];
    let mut chats = Vec::new();
    for (name, args) in &steps {
        let chat = c.tool("t1", name, args.clone()).await;
        assert!(chat.is_ok(), "{name}: {}", chat.summary_line);
        chats.push(chat);
    }
    let sent = st.mcp.service.sent();
    assert_eq!(sent.len(), steps.len());
    assert!(sent[0].body.get("inputModel").is_none());
    for i in 1..sent.len() {
        let input = presigned_ref(sent[i].body["inputModel"].as_str().unwrap());
        // Queries do not move the model, so the latest mutating result is the input.
        let latest = chats[..i].iter().rev().find(|c| c.operation != Operation::Query).unwrap();
        assert_eq!(Some(&input), latest.file_ref.as_ref(), "step {i}");
    }
    assert_eq!(chats[4].file_ref, chats[3].file_ref);

    for (s, (name, args)) in sent.iter().zip(&steps) {
        let obj = s.body.as_object().unwrap();
        assert!(obj.keys().all(|k| ALLOWED_FIELDS.contains(&k.as_str())), "{obj:?}");
        assert!(validate_request(s.endpoint, &s.body).is_ok());
        assert_eq!(s.body["toolName"], json!(name));
        assert_eq!(&s.body["params"], args);
        assert!(!s.body.to_string().contains("native"));
        let want = match *name {
            "create_project" => Endpoint::Create,
            "query_elements" => Endpoint::Query,
            _ => Endpoint::Modify,
        };
        assert_eq!(s.endpoint, want);
    }

    let state = st.mcp.service.session("t1").await.unwrap();
    assert!(state.invariant_holds());
    assert_eq!(state.current_model, chats[5].file_ref);
    let versions = st.store_client().list_versions("models", "sessions/t1/model.ifc").await.unwrap();
    assert_eq!(versions.len(), 5);
    st.shutdown().await;
}

#[tokio::test]
async fn errors_leave_the_current_model_alone() {
    let (_d, st) = stack(true).await;
    let c = Client::new(st.mcp_url());
    let chat = c.tool("e", "add_storey", json!({"name": "L1", "elevation": 0.0})).await;
    assert_eq!(chat.status, Status::Error);
    assert!(chat.summary_line.contains("no current model"));
    assert!(st.mcp.service.sent().is_empty());

    let created = c.tool("e", "create_project", json!({"name": "E"})).await;
    assert!(created.is_ok());
    let bad = c.tool("e", "add_door", json!({"wallRef":"nope","offsetAlongWall":0.5,"width":0.9,"height":2.0})).await;
    assert_eq!(bad.status, Status::Error);
    assert!(bad.file_ref.is_none());
    let state = st.mcp.service.session("e").await.unwrap();
    assert_eq!(state.current_model, created.file_ref);
    assert_eq!(state.history.len(), 3);
    assert!(state.invariant_holds());

    let junk = c.tool("e", "upload_model", json!({"content": "not an ifc file"})).await;
    assert_eq!(junk.status, Status::Error);
    assert_eq!(st.mcp.service.session("e").await.unwrap().current_model, created.file_ref);
    st.shutdown().await;
}

#[tokio::test]
async fn unreachable_executor_is_a_tool_error() {
    let dir = tempfile::tempdir().unwrap();
    let store = bimcp::store::serve(bimcp::store::StoreConfig::new(dir.path(), "k")).await.unwrap();
    let svc = McpService::new(McpConfig::new("http://127.0.0.1:9", &store.base_url, "k"));
    let call = json!({"jsonrpc":"2.0","id":1,"method":"tools/call","params":{"name":"create_project","arguments":{"name":"X"}}});
    let r = svc.handle_value(&call).await.unwrap();
    assert!(r.get("error").is_none());
    assert_eq!(r["result"]["isError"], true);
    assert!(r["result"]["structuredContent"]["summaryLine"].as_str().unwrap().contains("unreachable"));
    assert!(svc.session("default").await.unwrap().current_model.is_none());
}

#[tokio::test]
async fn storage_tools_round_trip() {
    let (_d, st) = stack(false).await;
    let c = Client::new(st.mcp_url());
    let seed = bimcp::exec::contract::SEED_MODEL;
    let up = c.tool("s", "upload_model", json!({"content": seed})).await;
    assert!(up.is_ok(), "{}", up.summary_line);
    assert_eq!(up.operation, Operation::Create);
    let up_ref = up.file_ref.clone().unwrap();
    assert_eq!(up_ref.key, "sessions/s/model.ifc");

    // The seed does not fit the default budget, so the text is left out and the URL kept.
    let down = c.tool("s", "download_model", json!({})).await;
    assert!(!down.truncated);
    assert_eq!(down.file_ref.as_ref(), Some(&up_ref));
    let lr = down.logical_result.unwrap();
    assert_eq!((lr["textOmitted"].clone(), lr["byteLength"].as_u64()), (json!(true), Some(seed.len() as u64)));
    let url = lr["downloadUrl"].as_str().unwrap();
    let fetched = reqwest::get(url).await.unwrap().text().await.unwrap();
    assert_eq!(fetched, seed);

    let q = c.tool("s", "query_elements", json!({"selector": "IfcWall"})).await;
    assert_eq!(q.logical_result.unwrap()["count"], 4);
    c.tool("s", "add_storey", json!({"name": "First", "elevation": 3.0})).await;

    let listed = c.tool("s", "list_model_versions", json!({})).await;
    let versions = listed.logical_result.unwrap()["versions"].as_array().unwrap().clone();
    assert_eq!(versions.len(), 2);
    assert_eq!(versions[0]["versionId"], json!(up_ref.version_id));

    let old = c.tool("s", "download_model", json!({"ref": up_ref.to_string(), "ttlSec": 60})).await;
    assert_eq!(old.file_ref.as_ref(), Some(&up_ref));
    assert!(old.logical_result.unwrap()["downloadUrl"].is_string());
    let tiny = bimcp::schemas::find_tool("upload_model").unwrap().examples()[0]["content"].as_str().unwrap();
    let up3 = c.tool("s3", "upload_model", json!({"content": tiny})).await;
    assert!(up3.is_ok(), "{}", up3.summary_line);
    let small = c.tool("s3", "download_model", json!({})).await;
    assert!(small.is_ok(), "{}", small.summary_line);
    assert_eq!(small.logical_result.unwrap()["text"], tiny);
    let empty = c.tool("s", "list_model_versions", json!({"key": "sessions/none/model.ifc"})).await;
    assert_eq!(empty.logical_result.unwrap()["versions"], json!([]));

    let other = c.tool("s2", "upload_model", json!({"content": seed, "key": "shared/base.ifc"})).await;
    assert_eq!(other.file_ref.as_ref().unwrap().key, "shared/base.ifc");
    let m = c.tool("s2", "add_storey", json!({"name": "Roof", "elevation": 6.0})).await;
    assert_eq!(m.file_ref.unwrap().key, "shared/base.ifc");
    st.shutdown().await;
}

#[tokio::test]
async fn read_only_batches_go_to_query() {
    let (_d, st) = stack(true).await;
    let c = Client::new(st.mcp_url());
    c.tool("b", "upload_model", json!({"content": bimcp::exec::contract::SEED_MODEL})).await;
    let ops = json!([{"op":"call_helper","helper":"query_elements","args":{"selector":"IfcWall"}}]);
    let r = c.tool("b", "run_batch", json!({"ops": ops, "readOnly": true})).await;
    assert!(r.is_ok(), "{}", r.summary_line);
    assert_eq!(r.operation, Operation::Query);
    let sent = st.mcp.service.sent();
    assert_eq!(sent[0].endpoint, Endpoint::Query);
    assert_eq!(sent[0].body["codeBatch"], ops);
    assert!(sent[0].body.get("toolName").is_none());

    let w = c
        .tool(
            "b",
            "run_batch",
            json!({"ops":[{"op":"call_helper","helper":"add_storey","args":{"name":"Top","elevation":9.0}}]}),
        )
        .await;
    assert!(w.is_ok(), "{}", w.summary_line);
    assert_eq!(st.mcp.service.sent()[1].endpoint, Endpoint::Modify);
    st.shutdown().await;
}

#[tokio::test]
async fn small_chat_budget_is_respected() {
    let dir = tempfile::tempdir().unwrap();
    let mut opts = StackOptions::new(dir.path());
    opts.chat_budget = 300;
    let st = Stack::start(opts).await.unwrap();
    let c = Client::new(st.mcp_url());
    c.tool("x", "upload_model", json!({"content": bimcp::exec::contract::SEED_MODEL})).await;
    for (name, args) in [
        ("spatial_tree", json!({})),
        ("download_model", json!({})),
        ("lookup_docs", json!({"query": "wall", "k": 10})),
        ("add_storey", json!({"name": "Upper", "elevation": 3.0})),
    ] {
        let chat = c.tool("x", name, args).await;
        assert!(chat.encoded_len() <= 300, "{name}: {}", chat.encoded_len());
        assert!(chat.is_ok(), "{name}");
    }
    let state = st.mcp.service.session("x").await.unwrap();
    assert!(state.history.iter().take(4).skip(1).all(|c| c.truncated));
    st.shutdown().await;
}

#[tokio::test]
async fn one_session_runs_calls_in_order() {
    let (_d, st) = stack(false).await;
    let c = std::sync::Arc::new(Client::new(st.mcp_url()));
    c.tool("q", "create_project", json!({"name": "Queue"})).await;
    c.tool("r", "create_project", json!({"name": "Other"})).await;
    let mut tasks = Vec::new();
    for i in 0..12 {
        let c = c.clone();
        let sid = if i % 3 == 0 { "r" } else { "q" };
        tasks.push(tokio::spawn(async move {
            c.tool(sid, "add_storey", json!({"name": format!("L{i}"), "elevation": i as f64})).await
        }));
    }
    for t in tasks {
        assert!(t.await.unwrap().is_ok());
    }
    // Every storey survives: no call read a model that another call was replacing.
    for (sid, want) in [("q", 8), ("r", 4)] {
        let q = c.tool(sid, "query_elements", json!({"selector": "IfcBuildingStorey"})).await;
        assert_eq!(q.logical_result.unwrap()["count"], want, "{sid}");
        let state = st.mcp.service.session(sid).await.unwrap();
        assert!(state.invariant_holds());
        let versions = st.store_client().list_versions("models", &format!("sessions/{sid}/model.ifc")).await.unwrap();
        assert_eq!(versions.len(), want + 1);
    }
    st.shutdown().await;
}

#[tokio::test]
async fn random_sequences_keep_sessions_sound() {
    let (_d, st) = stack(false).await;
    let c = Client::new(st.mcp_url());
    let store = st.store_client();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
    let sessions = ["a", "b", "c"];
    let (mut moves, mut failures) = (0, 0);
    for step in 0..90 {
        let sid = sessions[rng.gen_range(0..sessions.len())];
        let (name, args) = match rng.gen_range(0..10) {
            0 => ("create_project", json!({"name": format!("P{step}")})),
            1 => ("add_storey", json!({"name": format!("S{}", rng.gen_range(0..3)), "elevation": 3.0})),
            2 => (
                "create_wall",
                json!({"storeyRef": format!("S{}", rng.gen_range(0..3)),
                "start":[0,0],"end":[rng.gen_range(1..8),0],"height":3,"thickness":0.2,"name":"W"}),
            ),
            3 => {
                ("add_door", json!({"wallRef":"W","offsetAlongWall":rng.gen_range(0.0..9.0),"width":0.9,"height":2.0}))
            }
            4 => (
                "upload_model",
                json!({"content": if rng.gen_bool(0.7) { bimcp::exec::contract::SEED_MODEL } else { "garbage" }}),
            ),
            5 => ("delete_elements", json!({"selector": "IfcWall"})),
            6 => ("query_elements", json!({"selector": "IfcWall"})),
            7 => ("set_property", json!({"selector":"IfcWall","psetName":"P","propName":"N","value":step})),
            8 => ("download_model", json!({})),
            _ => ("lookup_docs", json!({"query": "storey"})),
        };
        let before = st.mcp.service.session(sid).await.map(|s| s.current_model);
        let chat = c.tool(sid, name, args).await;
        let state = st.mcp.service.session(sid).await.unwrap();
        assert!(state.invariant_holds(), "step {step}");
        assert_eq!(state.history.last(), Some(&chat));
        let moved = chat.is_ok() && chat.operation != Operation::Query;
        moves += moved as usize;
        failures += !chat.is_ok() as usize;
        if !moved {
            assert_eq!(Some(state.current_model.clone()), before.or(Some(None)), "step {step} {name}");
        }
        if let Some(cur) = &state.current_model {
            assert!(store.get_ref(cur).await.is_ok());
        }
    }
    assert!(moves >= 15 && failures >= 10, "moves {moves}, failures {failures}");
    st.shutdown().await;
}
