use std::collections::BTreeMap;
use std::fmt;

use chrono::{DateTime, SecondsFormat, Utc};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// Reference to one stored model version.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ModelRef {
    pub bucket: String,
    pub key: String,
    pub version_id: String,
}

impl ModelRef {
    pub fn new(bucket: impl Into<String>, key: impl Into<String>, version_id: impl Into<String>) -> Self {
        Self { bucket: bucket.into(), key: key.into(), version_id: version_id.into() }
    }

    pub fn is_well_formed(&self) -> bool {
        !self.bucket.is_empty() && !self.key.is_empty() && !self.version_id.is_empty()
    }

    /// Parses the `bucket/key@versionId` shorthand used on the command line.
    pub fn parse_shorthand(s: &str) -> Option<Self> {
        let (path, version) = s.rsplit_once('@')?;
        let (bucket, key) = path.split_once('/')?;
        let r = Self::new(bucket, key, version);
        r.is_well_formed().then_some(r)
    }
}

impl fmt::Display for ModelRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}@{}", self.bucket, self.key, self.version_id)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Operation {
    Create,
    Modify,
    Query,
}

impl Operation {
    pub fn as_str(self) -> &'static str {
        match self {
            Operation::Create => "create",
            Operation::Modify => "modify",
            Operation::Query => "query",
        }
    }
}

impl fmt::Display for Operation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// RFC 3339 UTC timestamp with millisecond precision.
pub fn timestamp_now() -> String {
    format_timestamp(Utc::now())
}

pub fn format_timestamp(t: DateTime<Utc>) -> String {
    t.to_rfc3339_opts(SecondsFormat::Millis, true)
}

/// Lowercase SHA-256 hex digest.
pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Digest of a JSON value under its canonical (sorted-key, compact) encoding.
pub fn json_digest(v: &serde_json::Value) -> String {
    // serde_json's default map is ordered, so to_string is canonical.
    sha256_hex(serde_json::to_string(v).expect("json values serialize").as_bytes())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Manifest {
    pub created_at: String,
    pub operation: Operation,
    pub tool_name: String,
    pub backend_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input_model: Option<ModelRef>,
    pub params_digest: String,
    /// Optional capability notes from the backend (e.g. coarse diffs).
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub capabilities: BTreeMap<String, serde_json::Value>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChangeKind {
    Added,
    Removed,
    Modified,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ChangedAttribute {
    pub attr_index: usize,
    pub attr_name: String,
    pub before: String,
    pub after: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct DiffEntry {
    pub entity_key: String,
    pub entity_type: String,
    pub change_kind: ChangeKind,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub changed_attributes: Vec<ChangedAttribute>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct DiffRaw {
    pub entries: Vec<DiffEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub old_ref: Option<ModelRef>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub new_ref: Option<ModelRef>,
}

impl DiffRaw {
    pub fn new(entries: Vec<DiffEntry>) -> Self {
        Self { entries, old_ref: None, new_ref: None }
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn summarize(&self) -> DiffSummary {
        summarize_diff(self)
    }

    /// Checks the key uniqueness and modified-iff-attributes invariants.
    pub fn check_invariants(&self) -> Result<(), String> {
        let mut seen = std::collections::HashSet::new();
        for e in &self.entries {
            if !seen.insert(&e.entity_key) {
                return Err(format!("duplicate entity key {}", e.entity_key));
            }
            if (e.change_kind == ChangeKind::Modified) == e.changed_attributes.is_empty() {
                return Err(format!("entry {} violates the changedAttributes rule", e.entity_key));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChangeCounts {
    pub added: usize,
    pub removed: usize,
    pub modified: usize,
}

impl ChangeCounts {
    pub fn total(&self) -> usize {
        self.added + self.removed + self.modified
    }

    fn bump(&mut self, kind: ChangeKind) {
        match kind {
            ChangeKind::Added => self.added += 1,
            ChangeKind::Removed => self.removed += 1,
            ChangeKind::Modified => self.modified += 1,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct DiffSummary {
    pub per_type: BTreeMap<String, ChangeCounts>,
    pub totals: ChangeCounts,
}

impl DiffSummary {
    pub fn added(&self, entity_type: &str) -> usize {
        self.per_type.get(entity_type).map_or(0, |c| c.added)
    }

    pub fn removed(&self, entity_type: &str) -> usize {
        self.per_type.get(entity_type).map_or(0, |c| c.removed)
    }

    pub fn modified(&self, entity_type: &str) -> usize {
        self.per_type.get(entity_type).map_or(0, |c| c.modified)
    }
}

/// Aggregates a diff into per-type and total counts.
pub fn summarize_diff(diff: &DiffRaw) -> DiffSummary {
    let mut summary = DiffSummary::default();
    for e in &diff.entries {
        summary.per_type.entry(e.entity_type.clone()).or_default().bump(e.change_kind);
        summary.totals.bump(e.change_kind);
    }
    summary
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Ok,
    Error,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Artifact {
    pub status: Status,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub file_ref: Option<ModelRef>,
    pub manifest: Manifest,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub logical_result: Option<serde_json::Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diff_raw: Option<DiffRaw>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diff_summary: Option<DiffSummary>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error_message: Option<String>,
}

impl Artifact {
    pub fn error(manifest: Manifest, message: impl Into<String>) -> Self {
        Self {
            status: Status::Error,
            file_ref: None,
            manifest,
            logical_result: None,
            diff_raw: None,
            diff_summary: None,
            error_message: Some(message.into()),
        }
    }

    pub fn is_ok(&self) -> bool {
        self.status == Status::Ok
    }

    /// Validates the status/operation field-presence rules.
    pub fn check_invariants(&self) -> Result<(), String> {
        match self.status {
            Status::Error => {
                if self.error_message.is_none() {
                    return Err("error artifact without errorMessage".into());
                }
            }
            Status::Ok => match self.manifest.operation {
                Operation::Create | Operation::Modify => {
                    if self.file_ref.is_none() || self.diff_raw.is_none() || self.diff_summary.is_none() {
                        return Err("ok create/modify artifact must carry fileRef, diffRaw and diffSummary".into());
                    }
                }
                Operation::Query => {
                    if self.logical_result.is_none() {
                        return Err("ok query artifact must carry logicalResult".into());
                    }
                    if self.file_ref != self.manifest.input_model {
                        return Err("query artifact fileRef must echo the input model".into());
                    }
                }
            },
        }
        if let Some(d) = &self.diff_raw {
            d.check_invariants()?;
            if let Some(s) = &self.diff_summary {
                if *s != summarize_diff(d) {
                    return Err("diffSummary does not match diffRaw".into());
                }
            }
        }
        Ok(())
    }
}
