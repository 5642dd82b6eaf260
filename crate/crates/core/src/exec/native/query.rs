//! Read-only tools.

use serde::Deserialize;
use serde_json::{json, Value};

use super::build::list_refs;
use crate::exec::AdapterError;
use crate::ifc::select::{select_parsed, Selector};
use crate::ifc::{IfcEntity, IfcModel, SpfValue};

#[derive(Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct QueryElements {
    selector: String,
    limit: Option<usize>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpatialTree {}

/// GlobalId when rooted, else the instance name.
pub fn display_id(e: &IfcEntity) -> String {
    e.global_id().map(str::to_string).unwrap_or_else(|| format!("#{}", e.id))
}

pub fn query_elements(m: &IfcModel, p: QueryElements) -> Result<Value, AdapterError> {
    let sel = Selector::parse(&p.selector).map_err(|e| AdapterError::params(e.to_string()))?;
    let hits = select_parsed(m, &sel);
    let shown = &hits[..hits.len().min(p.limit.unwrap_or(usize::MAX))];
    Ok(json!({
        "count": hits.len(),
        "ids": shown.iter().map(|e| display_id(e)).collect::<Vec<_>>(),
        "elements": shown
            .iter()
            .map(|e| json!({ "globalId": display_id(e), "type": e.type_name, "name": e.name() }))
            .collect::<Vec<_>>(),
    }))
}

fn related(m: &IfcModel, rel_class: &str, relating: usize, related: usize, id: u64) -> Vec<u64> {
    m.of_type(rel_class)
        .filter(|r| r.attrs.get(relating).and_then(SpfValue::as_ref_id) == Some(id))
        .flat_map(|r| list_refs(m, r.id, related))
        .collect()
}

fn node(m: &IfcModel, id: u64, depth: usize) -> Value {
    let e = m.get(id).expect("node exists");
    let mut children = Vec::new();
    let mut elements = Vec::new();
    if depth < 64 {
        for c in related(m, "IfcRelAggregates", 4, 5, id) {
            match m.get(c) {
                Some(ce) if ce.is_a("IfcSpatialStructureElement") || ce.is_a("IfcSpatialElement") => {
                    children.push(node(m, c, depth + 1))
                }
                Some(ce) => {
                    elements.push(json!({ "type": ce.type_name, "globalId": display_id(ce), "name": ce.name() }))
                }
                None => {}
            }
        }
        for c in related(m, "IfcRelContainedInSpatialStructure", 5, 4, id) {
            if let Some(ce) = m.get(c) {
                elements.push(json!({ "type": ce.type_name, "globalId": display_id(ce), "name": ce.name() }));
            }
        }
    }
    let mut out = json!({
        "type": e.type_name,
        "globalId": display_id(e),
        "name": e.name(),
        "children": children,
        "elements": elements,
    });
    if e.is_a("IfcBuildingStorey") {
        if let Some(z) = e.attr("Elevation").and_then(SpfValue::as_f64) {
            out["elevation"] = json!(z);
        }
    }
    out
}

pub fn spatial_tree(m: &IfcModel) -> Value {
    let roots: Vec<Value> = m.of_type("IfcProject").map(|p| node(m, p.id, 0)).collect();
    json!({ "projects": roots })
}
