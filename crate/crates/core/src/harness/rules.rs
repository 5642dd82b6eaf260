//! Rule evaluation and the automated part of the review scale.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::case::{Check, Rule};
use crate::ifc::select::{property_value, select};
use crate::ifc::{schema_check, schema_table, IfcModel, SpfValue};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuleResult {
    pub rule: Rule,
    pub passed: bool,
    /// Number of selected entities (0 when the selector failed).
    pub count: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RuleReport {
    pub results: Vec<RuleResult>,
    pub rule_pass_rate: f64,
}

impl RuleReport {
    pub fn all_passed(&self) -> bool {
        self.results.iter().all(|r| r.passed)
    }
}

/// Percentage with an empty denominator counted as zero.
pub fn percent(part: usize, whole: usize) -> f64 {
    if whole == 0 {
        0.0
    } else {
        part as f64 * 100.0 / whole as f64
    }
}

fn num_eq(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-6 * b.abs().max(1.0)
}

/// Compares a model value with an expected JSON value.
pub fn value_matches(v: &SpfValue, want: &Value) -> bool {
    match (v, want) {
        (SpfValue::Typed(_, inner), _) => value_matches(inner, want),
        (SpfValue::Unset, Value::Null) => true,
        (SpfValue::String(s), Value::String(w)) => s == w,
        (SpfValue::Enum(e), Value::String(w)) => e.eq_ignore_ascii_case(w.trim_matches('.')),
        (SpfValue::Enum(e), Value::Bool(b)) => e == if *b { "T" } else { "F" },
        (SpfValue::Integer(i), Value::Number(n)) => n.as_f64().is_some_and(|n| num_eq(*i as f64, n)),
        (SpfValue::Real(r), Value::Number(n)) => n.as_f64().is_some_and(|n| num_eq(*r, n)),
        (SpfValue::List(items), Value::Array(ws)) => {
            items.len() == ws.len() && items.iter().zip(ws).all(|(i, w)| value_matches(i, w))
        }
        _ => false,
    }
}

fn entity_value(model: &IfcModel, id: u64, attr: &str) -> Result<Option<SpfValue>, String> {
    let e = model.get(id).ok_or_else(|| format!("#{id} missing"))?;
    if let Some((pset, prop)) = attr.split_once('.') {
        return Ok(property_value(model, id, pset, prop));
    }
    let idx = schema_table::attribute_index(&e.type_name, attr)
        .ok_or_else(|| format!("{} has no attribute {attr}", e.type_name))?;
    Ok(e.attrs.get(idx).cloned())
}

pub fn check_rule(model: &IfcModel, rule: &Rule) -> RuleResult {
    let fail = |count, reason: String| RuleResult { rule: rule.clone(), passed: false, count, reason: Some(reason) };
    let selected = match select(model, &rule.selector) {
        Ok(s) => s,
        Err(e) => return fail(0, e.to_string()),
    };
    let count = selected.len();
    let want = rule.value.as_u64().map(|v| v as usize);
    let outcome: Result<(), String> = match rule.check {
        Check::CountEq => match want {
            Some(w) if w == count => Ok(()),
            Some(w) => Err(format!("expected {w}, found {count}")),
            None => Err("value must be a non-negative integer".into()),
        },
        Check::CountGe => match want {
            Some(w) if count >= w => Ok(()),
            Some(w) => Err(format!("expected at least {w}, found {count}")),
            None => Err("value must be a non-negative integer".into()),
        },
        Check::Exists => {
            let expect = rule.value.as_bool().unwrap_or(true);
            match (expect, count > 0) {
                (true, true) | (false, false) => Ok(()),
                (true, false) => Err("nothing matched".into()),
                (false, true) => Err(format!("expected none, found {count}")),
            }
        }
        Check::AttrEq => {
            let attr = rule.attr.as_deref().unwrap_or_default();
            if count == 0 {
                Err("nothing matched".into())
            } else {
                selected.iter().try_for_each(|e| match entity_value(model, e.id, attr)? {
                    Some(v) if value_matches(&v, &rule.value) => Ok(()),
                    Some(v) => Err(format!("#{} {attr} is {}", e.id, v.to_spf())),
                    None => Err(format!("#{} has no {attr}", e.id)),
                })
            }
        }
    };
    match outcome {
        Ok(()) => RuleResult { rule: rule.clone(), passed: true, count, reason: None },
        Err(reason) => fail(count, reason),
    }
}

pub fn check_rules(model: &IfcModel, rules: &[Rule]) -> RuleReport {
    let results: Vec<RuleResult> = rules.iter().map(|r| check_rule(model, r)).collect();
    let passed = results.iter().filter(|r| r.passed).count();
    RuleReport { rule_pass_rate: percent(passed, results.len()), results }
}

/// Automated review level, 1 to 3.
///
/// 1: no valid model. 2: structurally valid with project, site, building
/// and at least one storey aggregated in order. 3: additionally every
/// element sits in a storey or fills an opening, every opening voids an
/// element, and every door and window fills an opening.
pub fn review_level(model: Option<&IfcModel>) -> u8 {
    let Some(m) = model else { return 1 };
    if !schema_check(m).passed {
        return 1;
    }
    let aggregated = |parent: &str, child: &str| {
        m.of_type("IfcRelAggregates").any(|r| {
            let relating = r.attrs.get(4).and_then(SpfValue::as_ref_id).and_then(|id| m.get(id));
            let related = r.attrs.get(5).and_then(SpfValue::as_list).unwrap_or(&[]);
            relating.is_some_and(|p| p.is_a(parent))
                && related.iter().filter_map(SpfValue::as_ref_id).any(|c| m.get(c).is_some_and(|c| c.is_a(child)))
        })
    };
    if !(aggregated("IfcProject", "IfcSite")
        && aggregated("IfcSite", "IfcBuilding")
        && aggregated("IfcBuilding", "IfcBuildingStorey"))
    {
        return 2;
    }
    let rel_ids = |class: &str, idx: usize| -> Vec<u64> {
        m.of_type(class)
            .flat_map(|r| match r.attrs.get(idx) {
                Some(SpfValue::Ref(id)) => vec![*id],
                Some(SpfValue::List(l)) => l.iter().filter_map(SpfValue::as_ref_id).collect(),
                _ => Vec::new(),
            })
            .collect()
    };
    let in_storey: Vec<u64> = m
        .of_type("IfcRelContainedInSpatialStructure")
        .filter(|r| {
            r.attrs
                .get(5)
                .and_then(SpfValue::as_ref_id)
                .and_then(|id| m.get(id))
                .is_some_and(|s| s.is_a("IfcBuildingStorey"))
        })
        .flat_map(|r| r.attrs.get(4).and_then(SpfValue::as_list).unwrap_or(&[]).iter().filter_map(SpfValue::as_ref_id))
        .collect();
    let fillings = rel_ids("IfcRelFillsElement", 5);
    let voiding = rel_ids("IfcRelVoidsElement", 5);
    let topology_ok = m.of_type("IfcElement").all(|e| {
        if e.is_a("IfcOpeningElement") {
            return voiding.contains(&e.id);
        }
        let fills = fillings.contains(&e.id);
        if (e.is_a("IfcDoor") || e.is_a("IfcWindow")) && !fills {
            return false;
        }
        fills || in_storey.contains(&e.id)
    });
    if topology_ok {
        3
    } else {
        2
    }
}
