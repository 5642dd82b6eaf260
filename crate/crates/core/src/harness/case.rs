//! Test-case files: a prompt, selector rules and an optional scripted trace.

use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::ifc::select::Selector;
use crate::schemas::{find_tool, Status};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Check {
    CountEq,
    CountGe,
    AttrEq,
    Exists,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Rule {
    pub selector: String,
    pub check: Check,
    /// Attribute name or `Pset.Prop` path; only for `attr_eq`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub attr: Option<String>,
    #[serde(default, skip_serializing_if = "Value::is_null")]
    pub value: Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct TraceStep {
    pub tool: String,
    #[serde(default)]
    pub arguments: Value,
    #[serde(default = "ok_status")]
    pub expect_status: Status,
}

fn ok_status() -> Status {
    Status::Ok
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct TestCase {
    pub id: String,
    pub prompt: String,
    pub rules: Vec<Rule>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub trace: Vec<TraceStep>,
    /// False when the case cannot be compared with external figures.
    #[serde(default)]
    pub comparable: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, thiserror::Error)]
pub enum CaseError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{path}: {source}")]
    Json { path: String, source: serde_json::Error },
    #[error("case {id}: {message}")]
    Invalid { id: String, message: String },
}

impl TestCase {
    pub fn from_json(text: &str, origin: &str) -> Result<Self, CaseError> {
        let case: TestCase =
            serde_json::from_str(text).map_err(|source| CaseError::Json { path: origin.to_string(), source })?;
        case.validate()?;
        Ok(case)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, CaseError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|source| CaseError::Io { path: path.display().to_string(), source })?;
        Self::from_json(&text, &path.display().to_string())
    }

    /// Selectors parse, `attr_eq` rules name an attribute, trace tools exist.
    pub fn validate(&self) -> Result<(), CaseError> {
        let bad = |message: String| Err(CaseError::Invalid { id: self.id.clone(), message });
        if self.id.is_empty() || !self.id.bytes().all(|b| b.is_ascii_alphanumeric() || b == b'_' || b == b'-') {
            return bad(format!("id {:?} must be non-empty and use only letters, digits, '-' and '_'", self.id));
        }
        for (i, r) in self.rules.iter().enumerate() {
            if let Err(e) = Selector::parse(&r.selector) {
                return bad(format!("rule {i}: {e}"));
            }
            match (r.check, &r.attr) {
                (Check::AttrEq, None) => return bad(format!("rule {i}: attr_eq needs attr")),
                (Check::AttrEq, Some(_)) => {}
                (_, Some(_)) => return bad(format!("rule {i}: attr is only used by attr_eq")),
                (_, None) => {}
            }
            if matches!(r.check, Check::CountEq | Check::CountGe) && r.value.as_u64().is_none() {
                return bad(format!("rule {i}: {:?} needs a non-negative integer value", r.check));
            }
        }
        for (i, s) in self.trace.iter().enumerate() {
            if find_tool(&s.tool).is_none() {
                return bad(format!("trace step {i}: unknown tool {}", s.tool));
            }
        }
        Ok(())
    }
}

/// Cases under `dir`, sorted by file name.
pub fn load_dir(dir: impl AsRef<Path>) -> Result<Vec<TestCase>, CaseError> {
    let dir = dir.as_ref();
    let io = |source| CaseError::Io { path: dir.display().to_string(), source };
    let mut paths: Vec<_> = std::fs::read_dir(dir)
        .map_err(io)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    paths.sort();
    paths.iter().map(TestCase::load).collect()
}
