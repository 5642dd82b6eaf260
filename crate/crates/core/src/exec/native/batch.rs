//! Low-level op batches.

use std::collections::HashMap;

use serde::Deserialize;
use serde_json::{json, Value};

use super::{run_query_tool, run_tool, QUERY_TOOLS};
use crate::exec::{AdapterError, BATCH_TOOL};
use crate::ifc::guid::{self, GuidGenerator};
use crate::ifc::spf::parse_value;
use crate::ifc::{schema_table, IfcModel, SpfValue};

#[derive(Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct RunBatch {
    pub ops: Vec<Value>,
    pub read_only: Option<bool>,
}

#[derive(Deserialize)]
#[serde(tag = "op", rename_all = "snake_case", deny_unknown_fields)]
enum Op {
    AddEntity {
        #[serde(rename = "type")]
        ty: String,
        attrs: Vec<String>,
        #[serde(rename = "as")]
        alias: Option<String>,
    },
    SetAttr {
        target: String,
        attr: AttrKey,
        value: String,
    },
    DeleteEntity {
        target: String,
    },
    CallHelper {
        helper: String,
        #[serde(default)]
        args: Option<Value>,
        #[serde(rename = "as")]
        alias: Option<String>,
    },
}

#[derive(Deserialize)]
#[serde(untagged)]
enum AttrKey {
    Index(usize),
    Name(String),
}

struct Batch<'a> {
    m: &'a mut IfcModel,
    guids: &'a mut GuidGenerator,
    aliases: HashMap<String, u64>,
}

fn at(i: usize, e: AdapterError) -> AdapterError {
    AdapterError::new(e.kind, format!("op {i}: {}", e.message))
}

impl Batch<'_> {
    fn target(&self, text: &str) -> Result<u64, AdapterError> {
        let id = match text.strip_prefix('#') {
            Some(n) if n.bytes().all(|b| b.is_ascii_digit()) => n.parse().ok(),
            Some(alias) => Some(
                *self
                    .aliases
                    .get(alias)
                    .ok_or_else(|| AdapterError::precondition(format!("unknown alias #{alias}")))?,
            ),
            None => self.m.by_global_id(text).map(|e| e.id),
        };
        id.filter(|id| self.m.get(*id).is_some())
            .ok_or_else(|| AdapterError::precondition(format!("target {text:?} not found")))
    }

    fn literal(&self, text: &str) -> Result<SpfValue, AdapterError> {
        parse_value(text, &self.aliases)
            .map_err(|e| AdapterError::params(format!("bad attribute literal {text:?}: {e}")))
    }

    fn bind(&mut self, alias: Option<String>, id: u64) -> Result<(), AdapterError> {
        if let Some(a) = alias {
            if self.aliases.insert(a.clone(), id).is_some() {
                return Err(AdapterError::params(format!("alias {a:?} bound twice")));
            }
        }
        Ok(())
    }

    fn apply(&mut self, op: Op, read_only: bool) -> Result<Value, AdapterError> {
        if read_only && !matches!(&op, Op::CallHelper { helper, .. } if QUERY_TOOLS.contains(&helper.as_str())) {
            return Err(AdapterError::precondition("read-only batches may only call query helpers"));
        }
        match op {
            Op::AddEntity { ty, attrs, alias } => {
                let def = schema_table::lookup(&ty)
                    .ok_or_else(|| AdapterError::params(format!("unknown entity type {ty:?}")))?;
                if def.is_abstract {
                    return Err(AdapterError::params(format!("{} is abstract", def.name)));
                }
                let mut values = attrs.iter().map(|a| self.literal(a)).collect::<Result<Vec<_>, _>>()?;
                let rooted = schema_table::is_subtype_of(&ty, "IfcRoot");
                if rooted && values.first().is_some_and(SpfValue::is_unset) {
                    values[0] = SpfValue::string(self.guids.next_guid());
                }
                let id = self.m.add(&ty, values);
                self.bind(alias, id)?;
                let mut out = json!({ "id": format!("#{id}") });
                if let Some(g) = self.m.get(id).and_then(|e| e.global_id()) {
                    out["globalId"] = json!(g);
                }
                Ok(out)
            }
            Op::SetAttr { target, attr, value } => {
                let id = self.target(&target)?;
                let v = self.literal(&value)?;
                let ty = self.m.get(id).expect("target exists").type_name.clone();
                let index = match attr {
                    AttrKey::Index(i) => i,
                    AttrKey::Name(n) => schema_table::attribute_index(&ty, &n)
                        .ok_or_else(|| AdapterError::params(format!("{ty} has no attribute {n:?}")))?,
                };
                if index == 0 && schema_table::is_subtype_of(&ty, "IfcRoot") {
                    let ok = v.as_str().is_some_and(guid::is_valid)
                        && !self.m.iter().any(|e| e.id != id && e.global_id() == v.as_str());
                    if !ok {
                        return Err(AdapterError::params("GlobalId must be a valid, unused identifier"));
                    }
                }
                let e = self.m.get_mut(id).expect("target exists");
                let slot = e
                    .attrs
                    .get_mut(index)
                    .ok_or_else(|| AdapterError::params(format!("{ty} has no attribute at index {index}")))?;
                *slot = v;
                Ok(json!({ "id": format!("#{id}") }))
            }
            Op::DeleteEntity { target } => {
                let id = self.target(&target)?;
                self.m.remove(id);
                let ids: Vec<u64> = self.m.iter().map(|e| e.id).collect();
                for other in ids {
                    let e = self.m.get_mut(other).expect("listed");
                    for a in e.attrs.iter_mut() {
                        a.remove_ref_from_lists(id);
                    }
                }
                if let Some(holder) = self.m.iter().find(|e| e.refs().any(|r| r == id)) {
                    return Err(AdapterError::precondition(format!("#{id} is still referenced by #{}", holder.id)));
                }
                self.aliases.retain(|_, v| *v != id);
                Ok(json!({ "deleted": format!("#{id}") }))
            }
            Op::CallHelper { helper, args, alias } => {
                if helper == BATCH_TOOL {
                    return Err(AdapterError::params("run_batch cannot be nested"));
                }
                let args = args.unwrap_or_else(|| json!({}));
                let out = if QUERY_TOOLS.contains(&helper.as_str()) {
                    run_query_tool(&helper, &args, self.m)?
                } else {
                    run_tool(&helper, &args, self.m, self.guids)?
                };
                if alias.is_some() {
                    let gid = out.get("globalId").and_then(Value::as_str).ok_or_else(|| {
                        AdapterError::params(format!("{helper} returns no element to bind an alias to"))
                    })?;
                    let id = self.m.by_global_id(gid).map(|e| e.id).expect("helper returned a live GlobalId");
                    self.bind(alias, id)?;
                }
                Ok(out)
            }
        }
    }
}

/// Applies `ops` in order. Errors leave `m` partially modified; callers own
/// the rollback.
pub fn run(ops: &[Value], read_only: bool, m: &mut IfcModel, guids: &mut GuidGenerator) -> Result<Value, AdapterError> {
    if ops.is_empty() {
        return Err(AdapterError::params("codeBatch is empty"));
    }
    let mut b = Batch { m, guids, aliases: HashMap::new() };
    let mut results = Vec::with_capacity(ops.len());
    for (i, raw) in ops.iter().enumerate() {
        let op: Op = serde_json::from_value(raw.clone()).map_err(|e| at(i, AdapterError::params(e.to_string())))?;
        results.push(b.apply(op, read_only).map_err(|e| at(i, e))?);
    }
    let mut aliases: Vec<(&String, &u64)> = b.aliases.iter().collect();
    aliases.sort();
    let aliases: serde_json::Map<String, Value> = aliases
        .into_iter()
        .map(|(k, &id)| {
            let shown = b.m.get(id).and_then(|e| e.global_id()).map(str::to_string).unwrap_or(format!("#{id}"));
            (k.clone(), json!(shown))
        })
        .collect();
    Ok(json!({ "results": results, "aliases": aliases }))
}
