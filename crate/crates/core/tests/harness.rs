use std::collections::HashMap;
use std::path::Path;
use std::sync::Arc;

use axum::routing::post;
use axum::{Json, Router};
use bimcp::harness::{
    self, check_rules, render_tables, summarize, AgentKind, Check, LlmConfig, McpClient, Rule, RunMetrics, RunOptions,
    TestCase,
};
use bimcp::schemas::Status;
use bimcp::stack::{Stack, StackOptions};
use serde_json::{json, Value};

fn cases_dir() -> std::path::PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("cases")
}

fn bundled() -> Vec<TestCase> {
    harness::case::load_dir(cases_dir()).unwrap()
}

async fn stack(deterministic: bool) -> (tempfile::TempDir, Stack) {
    let dir = tempfile::tempdir().unwrap();
    let mut opts = StackOptions::new(dir.path());
    opts.deterministic = deterministic;
    (dir, Stack::start(opts).await.unwrap())
}

/// Raw STEP data lines, split without the library parser.
struct Raw {
    lines: HashMap<u64, (String, Vec<String>)>,
}

fn split_args(s: &str) -> Vec<String> {
    let (mut out, mut cur, mut depth, mut quoted) = (Vec::new(), String::new(), 0, false);
    let chars: Vec<char> = s.chars().collect();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if quoted {
            cur.push(c);
            if c == '\'' {
                if chars.get(i + 1) == Some(&'\'') {
                    cur.push('\'');
                    i += 1;
                } else {
                    quoted = false;
                }
            }
        } else {
            match c {
                '\'' => {
                    quoted = true;
                    cur.push(c);
                }
                '(' => {
                    depth += 1;
                    cur.push(c);
                }
                ')' => {
                    depth -= 1;
                    cur.push(c);
                }
                ',' if depth == 0 => out.push(std::mem::take(&mut cur)),
                _ => cur.push(c),
            }
        }
        i += 1;
    }
    out.push(cur);
    out.into_iter().map(|a| a.trim().to_string()).collect()
}

impl Raw {
    fn new(text: &str) -> Self {
        let re = regex::Regex::new(r"^#(\d+)\s*=\s*([A-Z0-9_]+)\((.*)\);\s*$").unwrap();
        let lines = text
            .lines()
            .filter_map(|l| re.captures(l))
            .map(|c| (c[1].parse().unwrap(), (c[2].to_string(), split_args(&c[3]))))
            .collect();
        Self { lines }
    }

    fn of_type(&self, ty: &str) -> Vec<u64> {
        let ty = ty.to_uppercase();
        let mut ids: Vec<u64> = self
            .lines
            .iter()
            .filter(|(_, (t, _))| *t == ty || *t == format!("{ty}STANDARDCASE"))
            .map(|(id, _)| *id)
            .collect();
        ids.sort();
        ids
    }

    fn arg(&self, id: u64, i: usize) -> &str {
        &self.lines[&id].1[i]
    }

    fn refs(list: &str) -> Vec<u64> {
        list.trim_matches(|c| c == '(' || c == ')')
            .split(',')
            .filter_map(|r| r.trim().strip_prefix('#').and_then(|n| n.parse().ok()))
            .collect()
    }

    fn property(&self, element: u64, pset: &str, prop: &str) -> Option<String> {
        for rel in self.of_type("IFCRELDEFINESBYPROPERTIES") {
            if !Raw::refs(self.arg(rel, 4)).contains(&element) {
                continue;
            }
            let def = Raw::refs(self.arg(rel, 5))[0];
            if self.arg(def, 2) != format!("'{pset}'") {
                continue;
            }
            for p in Raw::refs(self.arg(def, 4)) {
                if self.arg(p, 0) == format!("'{prop}'") {
                    return Some(self.arg(p, 2).to_string());
                }
            }
        }
        None
    }
}

/// Attribute positions needed by the bundled rules.
fn attr_index(attr: &str) -> usize {
    match attr {
        "Name" => 2,
        "Description" => 3,
        "Elevation" | "RefLatitude" => 9,
        "RefLongitude" => 10,
        "RefElevation" => 11,
        other => panic!("oracle has no index for {other}"),
    }
}

fn raw_matches(raw: &str, want: &Value) -> bool {
    let inner = raw.find('(').filter(|_| raw.starts_with("IFC")).map(|i| &raw[i + 1..raw.len() - 1]).unwrap_or(raw);
    match want {
        Value::Bool(b) => inner == if *b { ".T." } else { ".F." },
        Value::String(s) => inner == format!("'{s}'"),
        Value::Number(n) => inner.parse::<f64>().is_ok_and(|v| (v - n.as_f64().unwrap()).abs() < 1e-6),
        Value::Array(items) => {
            let parts = split_args(inner.trim_start_matches('(').trim_end_matches(')'));
            parts.len() == items.len() && parts.iter().zip(items).all(|(p, w)| raw_matches(p, w))
        }
        _ => false,
    }
}

fn brute_select(raw: &Raw, selector: &str) -> Vec<u64> {
    let mut parts = selector.split(',').map(str::trim);
    let ty = parts.next().unwrap();
    let filters: Vec<(&str, &str)> = parts.map(|f| f.split_once('=').unwrap()).collect();
    raw.of_type(ty)
        .into_iter()
        .filter(|id| {
            filters.iter().all(|(lhs, rhs)| match lhs.split_once('.') {
                Some((pset, prop)) => {
                    let want = if rhs.eq_ignore_ascii_case("TRUE") { json!(true) } else { json!(rhs) };
                    raw.property(*id, pset, prop).is_some_and(|v| raw_matches(&v, &want))
                }
                None => raw.arg(*id, attr_index(lhs)) == format!("'{rhs}'"),
            })
        })
        .collect()
}

fn brute_rule(raw: &Raw, rule: &Rule) -> bool {
    let hits = brute_select(raw, &rule.selector);
    let n = hits.len() as u64;
    match rule.check {
        Check::CountEq => rule.value.as_u64() == Some(n),
        Check::CountGe => n >= rule.value.as_u64().unwrap(),
        Check::Exists => (n > 0) == rule.value.as_bool().unwrap_or(true),
        Check::AttrEq => {
            let attr = rule.attr.as_deref().unwrap();
            n > 0
                && hits.iter().all(|id| match attr.split_once('.') {
                    Some((pset, prop)) => raw.property(*id, pset, prop).is_some_and(|v| raw_matches(&v, &rule.value)),
                    None => raw_matches(raw.arg(*id, attr_index(attr)), &rule.value),
                })
        }
    }
}

/// Each rule with its value pushed off by one, so the oracle also sees failures.
fn perturbed(rule: &Rule) -> Rule {
    let mut r = rule.clone();
    r.value = match (&rule.check, &rule.value) {
        (_, Value::Number(n)) if n.is_u64() => json!(n.as_u64().unwrap() + 1),
        (_, Value::Number(n)) => json!(n.as_f64().unwrap() + 0.5),
        (_, Value::String(s)) => json!(format!("{s}x")),
        (_, Value::Bool(b)) => json!(!b),
        (_, Value::Array(a)) => {
            let mut a = a.clone();
            a[0] = json!(a[0].as_i64().unwrap() + 1);
            Value::Array(a)
        }
        (Check::Exists, Value::Null) => json!(false),
        _ => rule.value.clone(),
    };
    r
}

#[test]
fn bundled_cases_are_valid() {
    let cases = bundled();
    assert_eq!(cases.len(), 4);
    let mut ids: Vec<&str> = cases.iter().map(|c| c.id.as_str()).collect();
    ids.dedup();
    assert_eq!(ids.len(), 4);
    for c in &cases {
        assert!(!c.comparable, "{}", c.id);
        assert!(!c.trace.is_empty() && !c.rules.is_empty());
        c.validate().unwrap();
    }
    let bad = r#"{"id":"x","prompt":"p","rules":[{"selector":"IfcWall,","check":"count_eq","value":1}]}"#;
    assert!(TestCase::from_json(bad, "inline").is_err());
    let bad = r#"{"id":"x","prompt":"p","rules":[{"selector":"IfcWall","check":"attr_eq","value":1}]}"#;
    assert!(TestCase::from_json(bad, "inline").unwrap_err().to_string().contains("attr"));
    let bad = r#"{"id":"x","prompt":"p","rules":[],"trace":[{"tool":"fly"}]}"#;
    assert!(TestCase::from_json(bad, "inline").unwrap_err().to_string().contains("fly"));
}

#[tokio::test]
async fn rule_checks_agree_with_brute_force() {
    let (_d, st) = stack(true).await;
    let client = Arc::new(McpClient::new(st.mcp_url()));
    let mut compared = 0;
    for case in bundled() {
        let report =
            harness::run_case(client.clone(), &case, &AgentKind::Scripted, &RunOptions { reps: 1, parallel: false })
                .await
                .unwrap();
        let run = &report.runs[0];
        let r = run.metrics.final_model.clone().unwrap();
        let text = String::from_utf8(st.store_client().get_ref(&r).await.unwrap()).unwrap();
        let model = bimcp::ifc::parse(&text).unwrap();
        let raw = Raw::new(&text);
        assert!(raw.lines.len() == model.len(), "{}", case.id);
        for rule in &case.rules {
            for probe in [rule.clone(), perturbed(rule)] {
                let got = check_rules(&model, std::slice::from_ref(&probe)).results[0].passed;
                assert_eq!(got, brute_rule(&raw, &probe), "{}: {probe:?}", case.id);
                compared += 1;
            }
            assert!(brute_rule(&raw, rule), "{}: {rule:?}", case.id);
        }
        assert_eq!(run.rules.as_ref().unwrap().rule_pass_rate, 100.0);
    }
    assert!(compared >= 60);
    st.shutdown().await;
}

#[test]
fn rules_on_small_models() {
    let empty = bimcp::ifc::IfcModel::new(bimcp::ifc::SchemaId::Ifc4);
    let rule = |sel: &str, check: Check, value: Value| Rule { selector: sel.into(), check, attr: None, value };
    let r = check_rules(&empty, &[rule("IfcWall", Check::CountEq, json!(1))]);
    assert!(!r.results[0].passed);
    assert_eq!(r.results[0].count, 0);
    assert_eq!(r.rule_pass_rate, 0.0);
    let r =
        check_rules(&empty, &[rule("IfcWall", Check::CountEq, json!(0)), rule("IfcWall", Check::Exists, json!(false))]);
    assert_eq!(r.rule_pass_rate, 100.0);
    let seed = bimcp::ifc::parse(bimcp::exec::contract::SEED_MODEL).unwrap();
    let r = check_rules(
        &seed,
        &[
            rule("IfcWall", Check::CountEq, json!(4)),
            rule("IfcBuildingStorey", Check::CountGe, json!(2)),
            rule("IfcWall, Name=North Wall", Check::Exists, Value::Null),
            Rule { selector: "IfcWall".into(), check: Check::AttrEq, attr: Some("Bogus".into()), value: json!(1) },
            rule("IfcWall, Colour=1", Check::Exists, Value::Null),
        ],
    );
    let passed: Vec<bool> = r.results.iter().map(|x| x.passed).collect();
    assert_eq!(passed, [true, false, true, false, false]);
    assert!((r.rule_pass_rate - 40.0).abs() < 1e-9);
    assert!(r.results[3].reason.as_deref().unwrap().contains("Bogus"));
    assert!(r.results[4].reason.as_deref().unwrap().contains("Colour"));
    assert_eq!(harness::review_level(None), 1);
    assert_eq!(harness::review_level(Some(&empty)), 1);
}

fn metrics(case: &str, rep: usize, calls: usize, ok: f64, rules: f64, tokens: Option<u64>) -> RunMetrics {
    RunMetrics {
        case_id: case.into(),
        repetition: rep,
        session_id: format!("s{rep}"),
        steps: calls + 1,
        tool_calls: calls,
        tool_success_rate: ok,
        rule_pass_rate: rules,
        schema_pass_rate: 100.0,
        review_level: 3,
        tokens_total: tokens,
        wall_ms: 1,
        final_model: None,
        final_sha256: Some(format!("h{}", rep % 2)),
        unexpected_status: 0,
        failure: None,
    }
}

#[test]
fn averages_match_an_independent_pass() {
    let runs = vec![
        metrics("c", 1, 12, 100.0, 100.0, Some(203_476)),
        metrics("c", 2, 13, 92.307, 66.667, Some(199_001)),
        metrics("c", 3, 12, 100.0, 33.333, Some(210_333)),
        metrics("c", 4, 14, 85.714, 100.0, Some(190_000)),
        metrics("c", 5, 12, 100.0, 50.0, Some(214_570)),
    ];
    let s = summarize("c", false, &runs);
    let summary = serde_json::to_value(&s).unwrap();
    let raw: Vec<Value> = runs.iter().map(|r| serde_json::to_value(r).unwrap()).collect();
    let avg = |k: &str, scale: f64| raw.iter().map(|r| r[k].as_f64().unwrap() / scale).sum::<f64>() / raw.len() as f64;
    let r3 = |v: f64| format!("{v:.3}");
    for (field, src, scale) in [
        ("steps", "steps", 1.0),
        ("toolCalls", "toolCalls", 1.0),
        ("toolSuccessRate", "toolSuccessRate", 1.0),
        ("rulePassRate", "rulePassRate", 1.0),
        ("schemaPassRate", "schemaPassRate", 1.0),
        ("reviewLevel", "reviewLevel", 1.0),
        ("tokensK", "tokensTotal", 1000.0),
    ] {
        assert_eq!(r3(summary[field].as_f64().unwrap()), r3(avg(src, scale)), "{field}");
    }
    assert_eq!(r3(s.steps), "13.600");
    assert!(!s.identical_models);

    let tables = render_tables(std::slice::from_ref(&s));
    assert!(tables.text.contains("Agent Metrics") && tables.text.contains("Model Metrics"));
    assert!(tables.text.contains("c*"));
    let agent: Vec<&str> = tables.agent_csv.lines().collect();
    assert_eq!(agent[0], "Test Case,Steps,Tool Calls,Tool-Success Rate (%),Tokens Total per Run (K)");
    assert_eq!(agent[1], "c*,13.6,12.6,95.6,203.476");
    let model: Vec<&str> = tables.model_csv.lines().collect();
    assert_eq!(model[1], "c*,3.0,70.0,100.0");
    let widths: Vec<usize> = tables.text.lines().filter(|l| l.starts_with("c*")).map(str::len).collect();
    assert_eq!(widths.len(), 2);
}

#[tokio::test]
async fn deterministic_repetitions_give_identical_models() {
    let (_d, st) = stack(true).await;
    let client = Arc::new(McpClient::new(st.mcp_url()));
    for case in bundled() {
        let r =
            harness::run_case(client.clone(), &case, &AgentKind::Scripted, &RunOptions { reps: 5, parallel: false })
                .await
                .unwrap();
        assert_eq!(r.runs.len(), 5);
        assert!(r.summary.identical_models, "{}", case.id);
        let sessions: std::collections::BTreeSet<_> = r.runs.iter().map(|x| x.metrics.session_id.clone()).collect();
        assert_eq!(sessions.len(), 5);
        assert_eq!(r.summary.tool_success_rate, 100.0);
    }
    st.shutdown().await;
}

#[tokio::test]
async fn parallel_repetitions_use_separate_sessions() {
    let (_d, st) = stack(true).await;
    let client = Arc::new(McpClient::new(st.mcp_url()));
    let case = TestCase::load(cases_dir().join("tc_new_1.json")).unwrap();
    let r =
        harness::run_case(client, &case, &AgentKind::Scripted, &RunOptions { reps: 4, parallel: true }).await.unwrap();
    let reps: Vec<usize> = r.runs.iter().map(|x| x.metrics.repetition).collect();
    assert_eq!(reps, [1, 2, 3, 4]);
    assert!(r.summary.identical_models);
    assert_eq!(r.summary.rule_pass_rate, 100.0);
    for run in &r.runs {
        let versions = st
            .store_client()
            .list_versions("models", &format!("sessions/{}/model.ifc", run.metrics.session_id))
            .await
            .unwrap();
        assert_eq!(versions.len(), run.transcript.calls.iter().filter(|c| c.moved_model()).count());
    }
    st.shutdown().await;
}

#[tokio::test]
async fn broken_trace_reports_failures() {
    let (_d, st) = stack(false).await;
    let client = Arc::new(McpClient::new(st.mcp_url()));
    let mut case = TestCase::load(cases_dir().join("tc_doors_windows.json")).unwrap();
    let door = case.trace.iter_mut().find(|s| s.tool == "add_door").unwrap();
    door.arguments["width"] = json!(12.0);
    case.trace.push(harness::TraceStep {
        tool: "create_wall".into(),
        arguments: json!({"storeyRef": "Ground", "start": [0, 0], "end": [1, 0], "height": 3}),
        expect_status: Status::Error,
    });
    let r =
        harness::run_case(client, &case, &AgentKind::Scripted, &RunOptions { reps: 1, parallel: false }).await.unwrap();
    let run = &r.runs[0];
    let m = &run.metrics;
    assert_eq!(m.tool_calls, case.trace.len());
    let expected_rate = 100.0 * (case.trace.len() - 2) as f64 / case.trace.len() as f64;
    assert!((m.tool_success_rate - expected_rate).abs() < 1e-9);
    assert!(m.tool_success_rate < 100.0);
    assert_eq!(m.unexpected_status, 1);
    let failing = run.transcript.calls.iter().find(|c| c.tool == "add_door" && c.status == Status::Error).unwrap();
    assert!(failing.summary.contains("exceeds"), "{}", failing.summary);
    let rules = run.rules.as_ref().unwrap();
    assert!(rules.rule_pass_rate < 100.0);
    let failed: Vec<String> = rules.results.iter().filter(|x| !x.passed).map(|x| x.rule.selector.clone()).collect();
    assert!(failed.contains(&"IfcDoor".to_string()));
    assert!(failed.contains(&"IfcDoor, Name=Front Door".to_string()));
    assert_eq!(m.schema_pass_rate, 100.0);
    st.shutdown().await;
}

#[tokio::test]
async fn unreachable_mcp_aborts_with_the_url() {
    let client = Arc::new(McpClient::new("http://127.0.0.1:9/mcp"));
    let case = TestCase::load(cases_dir().join("tc_new_1.json")).unwrap();
    let err = harness::run_case(client, &case, &AgentKind::Scripted, &RunOptions { reps: 1, parallel: false })
        .await
        .unwrap_err();
    assert!(err.to_string().contains("127.0.0.1:9"), "{err}");
}

/// Chat endpoint that replays canned assistant messages.
async fn fake_llm(replies: Vec<Value>, repeat_last: bool) -> (String, Arc<std::sync::Mutex<Vec<Value>>>) {
    let seen = Arc::new(std::sync::Mutex::new(Vec::new()));
    let state = (Arc::new(std::sync::Mutex::new(0usize)), Arc::new(replies), seen.clone());
    let app = Router::new().route(
        "/v1/chat/completions",
        post(move |Json(body): Json<Value>| {
            let (counter, replies, seen) = state.clone();
            async move {
                seen.lock().unwrap().push(body);
                let mut i = counter.lock().unwrap();
                let idx = if repeat_last { (*i).min(replies.len() - 1) } else { *i };
                *i += 1;
                Json(json!({"choices": [{"message": replies[idx]}], "usage": {"total_tokens": 1000}}))
            }
        }),
    );
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    tokio::spawn(async move { axum::serve(listener, app).await.unwrap() });
    (format!("http://{addr}/v1/chat/completions"), seen)
}

fn tool_call(id: &str, name: &str, args: Value) -> Value {
    json!({"role": "assistant", "content": null,
        "tool_calls": [{"id": id, "type": "function", "function": {"name": name, "arguments": args.to_string()}}]})
}

#[tokio::test]
async fn react_loop_drives_the_session() {
    let (_d, st) = stack(false).await;
    let replies = vec![
        tool_call("a", "create_project", json!({"name": "LLM"})),
        tool_call("b", "add_storey", json!({"name": "Ground", "elevation": 0})),
        tool_call("c", "add_storey", json!({"name": 5})),
        json!({"role": "assistant", "content": "Done: one storey."}),
    ];
    let (url, seen) = fake_llm(replies, false).await;
    let cfg = LlmConfig { api_url: url, api_key: Some("k".into()), model: "m".into(), step_cap: 10 };
    let client = Arc::new(McpClient::new(st.mcp_url()));
    let mut case = TestCase::load(cases_dir().join("tc_new_1.json")).unwrap();
    case.rules.truncate(1);
    let r =
        harness::run_case(client, &case, &AgentKind::Llm(cfg), &RunOptions { reps: 1, parallel: false }).await.unwrap();
    let run = &r.runs[0];
    assert_eq!(run.metrics.tool_calls, 3);
    assert_eq!(run.metrics.steps, 4);
    assert_eq!(run.metrics.tokens_total, Some(4000));
    assert!((run.metrics.tool_success_rate - 200.0 / 3.0).abs() < 1e-9);
    assert_eq!(run.transcript.final_answer.as_deref(), Some("Done: one storey."));
    assert!(run.metrics.failure.is_none());
    assert_eq!(run.metrics.rule_pass_rate, 100.0);
    assert_eq!(r.summary.tokens_k, Some(4.0));

    let bodies = seen.lock().unwrap().clone();
    assert_eq!(bodies.len(), 4);
    let tools = bodies[0]["tools"].as_array().unwrap();
    assert_eq!(tools.len(), bimcp::schemas::tool_catalogue().len());
    assert!(tools.iter().all(|t| t["function"]["parameters"].get("examples").is_none()));
    assert_eq!(bodies[0]["messages"][1]["content"], json!(case.prompt));
    let last = bodies[3]["messages"].as_array().unwrap();
    let tool_msgs: Vec<&Value> = last.iter().filter(|m| m["role"] == "tool").collect();
    assert_eq!(tool_msgs.len(), 3);
    assert_eq!(tool_msgs[2]["tool_call_id"], "c");
    assert!(tool_msgs[2]["content"].as_str().unwrap().contains("-32602"));
    st.shutdown().await;
}

#[tokio::test]
async fn react_loop_stops_at_the_step_cap() {
    let (_d, st) = stack(false).await;
    let (url, _) = fake_llm(vec![tool_call("x", "lookup_docs", json!({"query": "wall"}))], true).await;
    let cfg = LlmConfig { api_url: url, api_key: None, model: "m".into(), step_cap: 3 };
    let client = McpClient::new(st.mcp_url());
    let case = TestCase::load(cases_dir().join("tc_new_1.json")).unwrap();
    let r = harness::run_once(&client, &case, &AgentKind::Llm(cfg), 1).await.unwrap();
    assert_eq!(r.metrics.tool_calls, 3);
    assert!(r.metrics.failure.as_deref().unwrap().contains("step cap"));
    assert!(r.metrics.final_model.is_none());
    assert_eq!(r.metrics.rule_pass_rate, 0.0);
    assert_eq!(r.metrics.review_level, 1);
    st.shutdown().await;
}

#[test]
fn cli_run_and_check() {
    let out = tempfile::tempdir().unwrap();
    let case = cases_dir().join("tc_new_1.json");
    let status = std::process::Command::new(env!("CARGO_BIN_EXE_harness"))
        .args(["run", "--local", "--reps", "2", "--case"])
        .arg(&case)
        .arg("--out")
        .arg(out.path())
        .env("TEST_DETERMINISTIC", "1")
        .output()
        .unwrap();
    assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
    let stdout = String::from_utf8_lossy(&status.stdout);
    assert!(stdout.contains("Agent Metrics"));
    for f in ["summary.json", "tables.txt", "agent_metrics.csv", "model_metrics.csv", "runs/tc_new_1.json"] {
        assert!(out.path().join(f).exists(), "{f}");
    }
    let summary: Value = serde_json::from_slice(&std::fs::read(out.path().join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary[0]["identicalModels"], true);

    let model = out.path().join("seed.ifc");
    std::fs::write(&model, bimcp::exec::contract::SEED_MODEL).unwrap();
    let check = std::process::Command::new(env!("CARGO_BIN_EXE_harness"))
        .args(["check", "--model"])
        .arg(&model)
        .arg("--case")
        .arg(&case)
        .output()
        .unwrap();
    // The seed has one storey and four walls, so several rules fail.
    assert_eq!(check.status.code(), Some(1));
    let text = String::from_utf8_lossy(&check.stdout);
    assert!(text.contains("\"rulePassRate\"") && text.contains("review level"));
}
