//! Adapter-agnostic conformance checks for an executor reachable over HTTP.
//!
//! The checks only use the public wire contract: the three endpoints, the
//! shared catalogue and the object store. Any backend, native or not, can be
//! pointed at them.

use reqwest::StatusCode;
use serde_json::{json, Value};

use super::client::ExecClient;
use crate::ifc::{self, schema_check};
use crate::schemas::{artifact_schema, validate, Artifact, Endpoint, ModelRef, Operation};
use crate::store::{Method, StoreClient};

/// Bundled input model: a project with one storey and four walls.
pub const SEED_MODEL: &str = include_str!("../../data/contract_seed.ifc");

/// Which part of the contract a check exercises. Partial backends run a
/// subset; `Full` needs working `/create` and a broad tool set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Group {
    Query,
    Errors,
    Full,
}

impl Group {
    pub const ALL: [Group; 3] = [Group::Query, Group::Errors, Group::Full];
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContractCase {
    pub name: &'static str,
    pub group: Group,
    pub passed: bool,
    pub detail: String,
}

pub struct ContractTarget<'a> {
    pub exec: &'a ExecClient,
    pub store: &'a StoreClient,
    pub bucket: &'a str,
    /// Key prefix reserved for this run.
    pub prefix: String,
    /// Whether the executor runs in deterministic mode.
    pub deterministic: bool,
}

type Check = Result<(), String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Check {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

impl ContractTarget<'_> {
    fn key(&self, name: &str) -> String {
        format!("{}/{name}.ifc", self.prefix)
    }

    fn put_url(&self, key: &str) -> String {
        self.store.presign(Method::Post, self.bucket, key, None, 600).expect("valid presign")
    }

    fn get_url(&self, r: &ModelRef) -> String {
        self.store.presign_get(r, 600).expect("valid presign")
    }

    async fn versions(&self, key: &str) -> usize {
        self.store.list_versions(self.bucket, key).await.map(|v| v.len()).unwrap_or(0)
    }

    async fn send(&self, ep: Endpoint, body: Value) -> Result<Artifact, String> {
        let (status, v) = self.exec.post_raw(ep, &body).await.map_err(|e| e.to_string())?;
        ensure(status == StatusCode::OK, || format!("{ep} answered {status}: {v}"))?;
        if let Some(bad) = validate::validate(artifact_schema(), &v).first() {
            return Err(format!("artifact violates schema at {}: {}", bad.path, bad.message));
        }
        let a: Artifact = serde_json::from_value(v).map_err(|e| e.to_string())?;
        a.check_invariants()?;
        ensure(a.manifest.operation == ep.operation(), || "manifest operation differs from endpoint".into())?;
        Ok(a)
    }

    /// Sends a request that must succeed; a stored result must parse and pass the structural check.
    async fn ok(&self, ep: Endpoint, body: Value) -> Result<Artifact, String> {
        let a = self.send(ep, body).await?;
        if !a.is_ok() {
            return Err(format!("expected ok, got error: {}", a.error_message.unwrap_or_default()));
        }
        if ep != Endpoint::Query {
            let r = a.file_ref.as_ref().expect("invariants hold");
            let bytes = self.store.get_ref(r).await.map_err(|e| e.to_string())?;
            let text = String::from_utf8(bytes).map_err(|e| e.to_string())?;
            let m = ifc::parse(&text).map_err(|e| format!("stored result does not parse: {e}"))?;
            let report = schema_check(&m);
            ensure(report.passed, || format!("stored result fails the check: {:?}", report.violations))?;
        }
        Ok(a)
    }

    async fn err(&self, ep: Endpoint, body: Value) -> Result<Artifact, String> {
        let a = self.send(ep, body).await?;
        ensure(!a.is_ok(), || "expected an error artifact".into())?;
        Ok(a)
    }

    async fn status_of(&self, ep: Endpoint, body: Value) -> Result<(StatusCode, Value), String> {
        self.exec.post_raw(ep, &body).await.map_err(|e| e.to_string())
    }

    /// Stores the bundled seed model directly, without the executor.
    async fn seed(&self, name: &str) -> Result<ModelRef, String> {
        let key = self.key(name);
        let v = self.store.put(self.bucket, &key, SEED_MODEL.as_bytes().to_vec()).await.map_err(|e| e.to_string())?;
        Ok(ModelRef::new(v.bucket, v.key, v.version_id))
    }

    async fn project(&self, name: &str) -> Result<ModelRef, String> {
        let key = self.key(name);
        let a = self
            .ok(
                Endpoint::Create,
                json!({"toolName": "create_project", "params": {"name": name}, "outputTarget": self.put_url(&key)}),
            )
            .await?;
        Ok(a.file_ref.expect("ok create has fileRef"))
    }

    async fn malformed_json(&self) -> Check {
        let resp = self.exec.post_raw(Endpoint::Create, &Value::Null).await.map_err(|e| e.to_string())?;
        ensure(resp.0 == StatusCode::UNPROCESSABLE_ENTITY, || format!("null body gave {}", resp.0))?;
        let raw = reqwest::Client::new()
            .post(format!("{}/create", self.exec.base_url()))
            .header("content-type", "application/json")
            .body("{not json")
            .send()
            .await
            .map_err(|e| e.to_string())?;
        ensure(raw.status() == StatusCode::BAD_REQUEST, || format!("broken JSON gave {}", raw.status()))
    }

    async fn schema_violations(&self) -> Check {
        let put = self.put_url(&self.key("never"));
        let cases = [
            (Endpoint::Create, json!({"toolName": "create_project", "params": {}})),
            (Endpoint::Create, json!({"toolName": "create_project", "params": {}, "outputTarget": put, "extra": 1})),
            (Endpoint::Modify, json!({"toolName": "add_storey", "params": {}, "outputTarget": put})),
            (Endpoint::Query, json!({"toolName": "spatial_tree", "codeBatch": [], "inputModel": put})),
            (Endpoint::Query, json!({"toolName": "spatial_tree"})),
        ];
        for (ep, body) in cases {
            let (status, v) = self.status_of(ep, body.clone()).await?;
            ensure(status == StatusCode::UNPROCESSABLE_ENTITY, || format!("{ep} {body} gave {status}"))?;
            ensure(v["violations"].as_array().is_some_and(|a| !a.is_empty()), || {
                format!("no violations listed for {body}")
            })?;
        }
        ensure(self.versions(&self.key("never")).await == 0, || "a rejected request wrote an object".into())
    }

    async fn create_then_modify(&self) -> Check {
        let base = self.project("cm").await?;
        let before = self.store.get_ref(&base).await.map_err(|e| e.to_string())?;
        let a = self
            .ok(
                Endpoint::Modify,
                json!({
                    "toolName": "add_storey",
                    "params": {"name": "Level 1", "elevation": 3.0},
                    "inputModel": self.get_url(&base),
                    "outputTarget": self.put_url(&base.key),
                }),
            )
            .await?;
        ensure(a.manifest.input_model.as_ref() == Some(&base), || "manifest does not name the input version".into())?;
        let diff = a.diff_raw.as_ref().expect("ok modify has diffRaw");
        ensure(diff.old_ref.as_ref() == Some(&base), || "diffRaw.oldRef is not the input".into())?;
        ensure(diff.new_ref == a.file_ref, || "diffRaw.newRef is not the output".into())?;
        let s = a.diff_summary.as_ref().expect("ok modify has summary");
        ensure(s.added("IFCBUILDINGSTOREY") == 1, || format!("expected one storey added: {s:?}"))?;
        let new = a.file_ref.expect("fileRef");
        ensure(new.key == base.key && new.version_id != base.version_id, || {
            "output is not a new version of the key".into()
        })?;
        let after = self.store.get_ref(&base).await.map_err(|e| e.to_string())?;
        ensure(before == after, || "input version changed".into())?;
        ensure(self.versions(&base.key).await == 2, || "expected exactly two versions".into())
    }

    async fn query_echoes_input(&self) -> Check {
        let base = self.seed("q").await?;
        let a = self
            .ok(Endpoint::Query, json!({"toolName": "query_elements", "params": {"selector": "IfcWall"}, "inputModel": self.get_url(&base)}))
            .await?;
        ensure(a.file_ref.as_ref() == Some(&base), || "query fileRef does not echo the input".into())?;
        ensure(a.manifest.input_model.as_ref() == Some(&base), || "manifest does not name the input".into())?;
        ensure(a.diff_raw.as_ref().is_none_or(|d| d.is_empty()), || "query carries a non-empty diff".into())?;
        ensure(self.versions(&base.key).await == 1, || "a query wrote a version".into())
    }

    async fn query_count_matches_scan(&self) -> Check {
        let base = self.seed("qc").await?;
        let m = ifc::parse(SEED_MODEL).expect("seed parses");
        let mut expected: Vec<String> = m
            .iter()
            .filter(|e| crate::ifc::schema_table::is_subtype_of(&e.type_name, "IfcWall"))
            .filter_map(|e| e.global_id().map(str::to_string))
            .collect();
        expected.sort();
        let a = self
            .ok(Endpoint::Query, json!({"toolName": "query_elements", "params": {"selector": "IfcWall"}, "inputModel": self.get_url(&base)}))
            .await?;
        let r = a.logical_result.unwrap_or_default();
        ensure(r["count"].as_u64() == Some(expected.len() as u64), || {
            format!("count {} != {}", r["count"], expected.len())
        })?;
        let mut ids: Vec<String> = r["ids"]
            .as_array()
            .map(|a| a.iter().filter_map(|v| v.as_str().map(str::to_string)).collect())
            .unwrap_or_default();
        ids.sort();
        ensure(ids == expected, || format!("ids {ids:?} != {expected:?}"))?;
        let a = self
            .ok(Endpoint::Query, json!({"toolName": "query_elements", "params": {"selector": "IfcDoor"}, "inputModel": self.get_url(&base)}))
            .await?;
        ensure(a.logical_result.as_ref().and_then(|r| r["count"].as_u64()) == Some(0), || {
            "empty selection is not count 0".into()
        })?;
        let a = self
            .send(Endpoint::Query, json!({"toolName": "query_elements", "params": {"selector": "Ifc Wall,,"}, "inputModel": self.get_url(&base)}))
            .await?;
        ensure(!a.is_ok(), || "selector syntax error was accepted".into())
    }

    async fn query_batches(&self) -> Check {
        let base = self.seed("qb").await?;
        let get = self.get_url(&base);
        let a = self.ok(Endpoint::Query, json!({"toolName": "spatial_tree", "params": {}, "inputModel": get})).await?;
        ensure(a.logical_result.is_some(), || "spatial_tree returned nothing".into())?;
        let a = self
            .ok(
                Endpoint::Query,
                json!({"codeBatch": [{"op": "call_helper", "helper": "query_elements", "args": {"selector": "IfcProject"}}], "inputModel": get}),
            )
            .await?;
        ensure(a.logical_result.is_some(), || "batch query returned nothing".into())?;
        ensure(self.versions(&base.key).await == 1, || "a query wrote a version".into())
    }

    async fn endpoint_tool_mismatch(&self) -> Check {
        let base = self.seed("mm").await?;
        let get = self.get_url(&base);
        let put = self.put_url(&base.key);
        self.err(
            Endpoint::Modify,
            json!({"toolName": "spatial_tree", "params": {}, "inputModel": get, "outputTarget": put}),
        )
        .await?;
        self.err(
            Endpoint::Query,
            json!({"toolName": "add_storey", "params": {"name": "x", "elevation": 0}, "inputModel": get}),
        )
        .await?;
        self.err(
            Endpoint::Query,
            json!({"codeBatch": [{"op": "set_attr", "target": "#1", "attr": 0, "value": "'x'"}], "inputModel": get}),
        )
        .await?;
        self.err(
            Endpoint::Modify,
            json!({"toolName": "no_such_tool", "params": {}, "inputModel": get, "outputTarget": put}),
        )
        .await?;
        ensure(self.versions(&base.key).await == 1, || "a refused request wrote a version".into())
    }

    async fn all_or_nothing(&self) -> Check {
        let base = self.seed("aon").await?;
        let get = self.get_url(&base);
        let put = self.put_url(&base.key);
        let failing = [
            json!({"toolName": "add_door", "params": {"wallRef": "missing", "offsetAlongWall": 0, "width": 1, "height": 2}, "inputModel": get, "outputTarget": put}),
            json!({"toolName": "add_storey", "params": {"name": "x"}, "inputModel": get, "outputTarget": put}),
            json!({"toolName": "run_batch", "params": {"ops": [
                {"op": "call_helper", "helper": "add_storey", "args": {"name": "ok", "elevation": 0}},
                {"op": "set_attr", "target": "#999999", "attr": 2, "value": "'boom'"}
            ]}, "inputModel": get, "outputTarget": put}),
        ];
        for body in failing {
            let a = self.err(Endpoint::Modify, body).await?;
            ensure(a.file_ref.is_none(), || "error artifact carries a fileRef".into())?;
        }
        ensure(self.versions(&base.key).await == 1, || "a failed request wrote a version".into())
    }

    async fn sequential_workflow(&self) -> Check {
        let mut cur = self.project("flow").await?;
        let steps = [
            ("add_storey", json!({"name": "Ground", "elevation": 0.0})),
            (
                "create_wall",
                json!({"storeyRef": "Ground", "start": [0, 0], "end": [5, 0], "height": 3, "thickness": 0.2, "name": "W"}),
            ),
            ("add_door", json!({"wallRef": "W", "offsetAlongWall": 1, "width": 0.9, "height": 2.1})),
            ("add_window", json!({"wallRef": "W", "offset": 3, "width": 1, "height": 1, "sillHeight": 1})),
            (
                "set_property",
                json!({"selector": "IfcWall", "psetName": "Pset_WallCommon", "propName": "IsExternal", "value": true}),
            ),
            ("georeference", json!({"latitude": 51.5, "longitude": -0.1})),
        ];
        for (tool, params) in steps {
            let a = self
                .ok(
                    Endpoint::Modify,
                    json!({"toolName": tool, "params": params, "inputModel": self.get_url(&cur), "outputTarget": self.put_url(&cur.key)}),
                )
                .await
                .map_err(|e| format!("{tool}: {e}"))?;
            cur = a.file_ref.expect("fileRef");
        }
        let q = self
            .ok(Endpoint::Query, json!({"toolName": "query_elements", "params": {"selector": "IfcWall, Pset_WallCommon.IsExternal=TRUE"}, "inputModel": self.get_url(&cur)}))
            .await?;
        let n = q.logical_result.as_ref().and_then(|v| v["count"].as_u64());
        ensure(n == Some(1), || format!("expected one external wall, got {n:?}"))
    }

    async fn bad_input_url(&self) -> Check {
        let base = self.seed("bad").await?;
        let mut get = self.get_url(&base);
        get.push('0');
        let a = self.err(Endpoint::Query, json!({"toolName": "spatial_tree", "params": {}, "inputModel": get})).await?;
        ensure(a.manifest.input_model.is_none(), || "unfetched input named in manifest".into())
    }

    async fn repeatable(&self) -> Check {
        let mut outputs = Vec::new();
        for i in 0..2 {
            let key = self.key(&format!("rep{i}"));
            let a = self
                .ok(
                    Endpoint::Create,
                    json!({"toolName": "create_project", "params": {"name": "Same"}, "outputTarget": self.put_url(&key)}),
                )
                .await?;
            let bytes = self.store.get_ref(a.file_ref.as_ref().unwrap()).await.map_err(|e| e.to_string())?;
            outputs.push((a.diff_summary.unwrap(), bytes));
        }
        ensure(outputs[0].0 == outputs[1].0, || "identical requests gave different diff summaries".into())?;
        if self.deterministic {
            ensure(outputs[0].1 == outputs[1].1, || "deterministic mode produced different bytes".into())?;
        }
        Ok(())
    }

    async fn operation_recorded(&self) -> Check {
        let key = self.key("op");
        let a = self
            .ok(
                Endpoint::Create,
                json!({"toolName": "create_project", "params": {"name": "Op"}, "outputTarget": self.put_url(&key)}),
            )
            .await?;
        ensure(a.manifest.operation == Operation::Create && a.manifest.tool_name == "create_project", || {
            format!("manifest {:?}", a.manifest)
        })?;
        ensure(!a.manifest.backend_id.is_empty(), || "empty backendId".into())
    }
}

/// Runs every check against `target`.
pub async fn run_contract(target: &ContractTarget<'_>) -> Vec<ContractCase> {
    run_groups(target, &Group::ALL).await
}

/// Runs the checks of the given groups, in a fixed order.
pub async fn run_groups(target: &ContractTarget<'_>, groups: &[Group]) -> Vec<ContractCase> {
    let mut out = Vec::new();
    macro_rules! case {
        ($group:ident, $name:literal, $f:ident) => {{
            if groups.contains(&Group::$group) {
                let r = target.$f().await;
                out.push(ContractCase {
                    name: $name,
                    group: Group::$group,
                    passed: r.is_ok(),
                    detail: r.err().unwrap_or_default(),
                });
            }
        }};
    }
    case!(Errors, "malformed_json", malformed_json);
    case!(Errors, "schema_violations", schema_violations);
    case!(Errors, "endpoint_tool_mismatch", endpoint_tool_mismatch);
    case!(Errors, "all_or_nothing", all_or_nothing);
    case!(Errors, "bad_input_url", bad_input_url);
    case!(Query, "query_echoes_input", query_echoes_input);
    case!(Query, "query_count_matches_scan", query_count_matches_scan);
    case!(Full, "query_batches", query_batches);
    case!(Full, "create_then_modify", create_then_modify);
    case!(Full, "sequential_workflow", sequential_workflow);
    case!(Full, "repeatable", repeatable);
    case!(Full, "operation_recorded", operation_recorded);
    out
}
