//! Structural model checks.
//!
//! The checks are: attribute arity against the bundled definition table
//! (IFC4 models only), dangling references, exactly one IfcProject, every
//! product reachable from the project through the decomposition,
//! containment and voiding relations, and GlobalId well-formedness and
//! uniqueness.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use super::guid;
use super::model::{IfcModel, SchemaId};
use super::schema_table;
use super::value::SpfValue;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    Arity,
    AbstractInstance,
    DanglingRef,
    ProjectCount,
    Unreachable,
    InvalidGlobalId,
    DuplicateGlobalId,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub kind: ViolationKind,
    /// Offending instance, when the violation is about one entity.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub entity: Option<u64>,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckReport {
    pub passed: bool,
    pub violations: Vec<Violation>,
}

impl CheckReport {
    pub fn count(&self, kind: ViolationKind) -> usize {
        self.violations.iter().filter(|v| v.kind == kind).count()
    }
}

/// (relation class, relating attribute index, related attribute index)
const SPATIAL_EDGES: &[(&str, usize, usize)] =
    &[("IfcRelAggregates", 4, 5), ("IfcRelContainedInSpatialStructure", 5, 4), ("IfcRelVoidsElement", 4, 5)];

fn related_ids(v: Option<&SpfValue>) -> Vec<u64> {
    match v {
        Some(SpfValue::Ref(id)) => vec![*id],
        Some(SpfValue::List(items)) => items.iter().filter_map(SpfValue::as_ref_id).collect(),
        _ => Vec::new(),
    }
}

/// Parent -> children edges of the spatial decomposition graph.
pub fn spatial_children(model: &IfcModel) -> HashMap<u64, Vec<u64>> {
    let mut edges: HashMap<u64, Vec<u64>> = HashMap::new();
    for (class, relating, related) in SPATIAL_EDGES {
        for rel in model.of_type(class) {
            let Some(parent) = rel.attrs.get(*relating).and_then(SpfValue::as_ref_id) else { continue };
            edges.entry(parent).or_default().extend(related_ids(rel.attrs.get(*related)));
        }
    }
    edges
}

pub fn schema_check(model: &IfcModel) -> CheckReport {
    let mut violations = Vec::new();

    if model.schema() == SchemaId::Ifc4 {
        for e in model.iter() {
            let Some(def) = schema_table::lookup(&e.type_name) else { continue };
            if def.is_abstract {
                violations.push(Violation {
                    kind: ViolationKind::AbstractInstance,
                    entity: Some(e.id),
                    message: format!("#{} instantiates abstract class {}", e.id, def.name),
                });
            }
            if e.attrs.len() != def.attributes.len() {
                violations.push(Violation {
                    kind: ViolationKind::Arity,
                    entity: Some(e.id),
                    message: format!(
                        "#{} {} has {} attributes, expected {}",
                        e.id,
                        def.name,
                        e.attrs.len(),
                        def.attributes.len()
                    ),
                });
            }
        }
    }

    for (from, to) in model.dangling_refs() {
        violations.push(Violation {
            kind: ViolationKind::DanglingRef,
            entity: Some(from),
            message: format!("#{from} references missing #{to}"),
        });
    }

    let projects: Vec<u64> = model.of_type("IfcProject").map(|e| e.id).collect();
    if projects.len() != 1 {
        violations.push(Violation {
            kind: ViolationKind::ProjectCount,
            entity: None,
            message: format!("expected exactly one IfcProject, found {}", projects.len()),
        });
    }

    let children = spatial_children(model);
    let mut reachable = BTreeSet::new();
    let mut stack = projects.clone();
    while let Some(id) = stack.pop() {
        if reachable.insert(id) {
            if let Some(c) = children.get(&id) {
                stack.extend(c.iter().copied().filter(|c| !reachable.contains(c)));
            }
        }
    }
    if !projects.is_empty() {
        for e in model.of_type("IfcProduct") {
            if !reachable.contains(&e.id) {
                violations.push(Violation {
                    kind: ViolationKind::Unreachable,
                    entity: Some(e.id),
                    message: format!("#{} {} is not reachable from the project", e.id, e.type_name),
                });
            }
        }
    }

    let mut by_gid: BTreeMap<&str, Vec<u64>> = BTreeMap::new();
    for e in model.iter().filter(|e| e.is_rooted()) {
        match e.attrs.first().and_then(SpfValue::as_str) {
            Some(g) if guid::is_valid(g) => by_gid.entry(g).or_default().push(e.id),
            other => violations.push(Violation {
                kind: ViolationKind::InvalidGlobalId,
                entity: Some(e.id),
                message: format!("#{} has invalid GlobalId {:?}", e.id, other.unwrap_or("")),
            }),
        }
    }
    for (g, ids) in by_gid.into_iter().filter(|(_, ids)| ids.len() > 1) {
        for &id in &ids[1..] {
            violations.push(Violation {
                kind: ViolationKind::DuplicateGlobalId,
                entity: Some(id),
                message: format!("#{id} reuses GlobalId {g} of #{}", ids[0]),
            });
        }
    }

    CheckReport { passed: violations.is_empty(), violations }
}
