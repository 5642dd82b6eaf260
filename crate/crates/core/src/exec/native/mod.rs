//! The native backend: tools implemented directly on [`IfcModel`].

pub mod batch;
pub mod build;
pub mod query;
pub mod tools;

use std::collections::BTreeMap;

use serde::de::DeserializeOwned;
use serde_json::{json, Value};

use super::{Adapter, AdapterError, AdapterErrorKind, RunContext, BATCH_TOOL};
use crate::ifc::guid::GuidGenerator;
use crate::ifc::{self, IfcModel, SchemaId};
use crate::schemas::{find_tool, validate, DiffRaw};
use build::Builder;

pub const BACKEND_ID: &str = "native-ifc";

/// Tools that only read the model.
pub const QUERY_TOOLS: &[&str] = &["query_elements", "spatial_tree"];

#[derive(Debug, Clone, Copy, Default)]
pub struct NativeAdapter;

/// Checks `params` against the catalogue schema of `tool`, then decodes it.
pub fn parse_params<T: DeserializeOwned>(tool: &str, params: &Value) -> Result<T, AdapterError> {
    let spec = find_tool(tool).filter(|t| t.is_bim()).ok_or_else(|| AdapterError::unknown_tool(tool))?;
    if let Some(v) = validate::validate(&spec.input_schema, params).first() {
        return Err(AdapterError::params(format!("{tool}: {} at {:?}", v.message, v.path)));
    }
    serde_json::from_value(params.clone()).map_err(|e| AdapterError::params(format!("{tool}: {e}")))
}

/// Runs one mutating high-level tool.
pub fn run_tool(
    tool: &str,
    params: &Value,
    m: &mut IfcModel,
    guids: &mut GuidGenerator,
) -> Result<Value, AdapterError> {
    let mut b = Builder::new(m, guids);
    match tool {
        "create_project" => tools::create_project(&mut b, parse_params(tool, params)?),
        "georeference" => tools::georeference(&mut b, parse_params(tool, params)?),
        "add_storey" => tools::add_storey(&mut b, parse_params(tool, params)?),
        "create_wall" => tools::create_wall(&mut b, parse_params(tool, params)?),
        "create_slab" => tools::create_slab(&mut b, parse_params(tool, params)?),
        "add_door" => tools::add_door(&mut b, parse_params(tool, params)?),
        "add_window" => tools::add_window(&mut b, parse_params(tool, params)?),
        "set_property" => tools::set_property(&mut b, parse_params(tool, params)?),
        "delete_elements" => tools::delete_elements(&mut b, parse_params(tool, params)?),
        t if QUERY_TOOLS.contains(&t) => {
            Err(AdapterError::precondition(format!("{t} is read only; send it to /query")))
        }
        t => Err(AdapterError::unknown_tool(t)),
    }
}

pub fn run_query_tool(tool: &str, params: &Value, m: &IfcModel) -> Result<Value, AdapterError> {
    match tool {
        "query_elements" => query::query_elements(m, parse_params(tool, params)?),
        "spatial_tree" => {
            let _: query::SpatialTree = parse_params(tool, params)?;
            Ok(query::spatial_tree(m))
        }
        t if find_tool(t).is_some_and(|s| s.is_bim()) => {
            Err(AdapterError::precondition(format!("{t} modifies the model; it is not a query tool")))
        }
        t => Err(AdapterError::unknown_tool(t)),
    }
}

impl Adapter for NativeAdapter {
    type Model = IfcModel;

    fn backend_id(&self) -> &str {
        BACKEND_ID
    }

    fn capabilities(&self) -> BTreeMap<String, Value> {
        BTreeMap::from([("diff".to_string(), json!("entity")), ("schemas".to_string(), json!(["IFC4", "IFC2X3"]))])
    }

    fn empty_model(&self) -> IfcModel {
        IfcModel::new(SchemaId::Ifc4)
    }

    fn load_model(&self, bytes: &[u8]) -> Result<IfcModel, AdapterError> {
        let text = std::str::from_utf8(bytes)
            .map_err(|e| AdapterError::new(AdapterErrorKind::Parse, format!("model is not UTF-8: {e}")))?;
        ifc::parse(text).map_err(|e| AdapterError::new(AdapterErrorKind::Parse, format!("cannot parse model: {e}")))
    }

    fn save_model(&self, model: &IfcModel, ctx: &RunContext) -> Vec<u8> {
        let mut m = model.clone();
        m.header.timestamp = ctx.timestamp.clone();
        ifc::serialize(&m).into_bytes()
    }

    fn is_query_tool(&self, tool: &str) -> bool {
        QUERY_TOOLS.contains(&tool)
    }

    fn run_high_level(
        &self,
        tool: &str,
        params: &Value,
        model: &mut IfcModel,
        ctx: &mut RunContext,
    ) -> Result<Option<Value>, AdapterError> {
        if tool == BATCH_TOOL {
            let p: batch::RunBatch = parse_params(tool, params)?;
            return batch::run(&p.ops, p.read_only.unwrap_or(false), model, &mut ctx.guids).map(Some);
        }
        run_tool(tool, params, model, &mut ctx.guids).map(Some)
    }

    fn run_batch(
        &self,
        ops: &[Value],
        model: &mut IfcModel,
        ctx: &mut RunContext,
    ) -> Result<Option<Value>, AdapterError> {
        batch::run(ops, true, model, &mut ctx.guids).map(Some)
    }

    fn run_query(&self, tool: &str, params: &Value, model: &IfcModel) -> Result<Value, AdapterError> {
        run_query_tool(tool, params, model)
    }

    fn diff(&self, old: &IfcModel, new: &IfcModel) -> DiffRaw {
        ifc::entity_diff(old, new)
    }

    fn validate(&self, model: &IfcModel) -> Result<(), AdapterError> {
        let report = ifc::schema_check(model);
        if report.passed {
            return Ok(());
        }
        let shown: Vec<&str> = report.violations.iter().take(3).map(|v| v.message.as_str()).collect();
        let more = report.violations.len().saturating_sub(shown.len());
        let mut msg = format!("result fails the structural check: {}", shown.join("; "));
        if more > 0 {
            msg.push_str(&format!(" (and {more} more)"));
        }
        Err(AdapterError::new(AdapterErrorKind::InvalidModel, msg))
    }
}
