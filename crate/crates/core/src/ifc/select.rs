//! Entity selectors.
//!
//! ```text
//! query   := TypeName (',' filter)*
//! filter  := AttrName '=' literal | PsetName '.' PropName '=' literal
//! literal := quoted string | number | TRUE | FALSE | bare text
//! ```
//!
//! Type names match the class and all of its subtypes in the bundled
//! hierarchy. Bare (unquoted) text is compared as a string.

use std::fmt;

use thiserror::Error;

use super::model::{IfcEntity, IfcModel};
use super::schema_table;
use super::value::SpfValue;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SelectError {
    #[error("selector syntax error: {0}")]
    Syntax(String),
    #[error("unknown attribute {attr:?} for {type_name}")]
    UnknownAttribute { type_name: String, attr: String },
}

#[derive(Debug, Clone, PartialEq)]
pub enum Literal {
    Str(String),
    Number(f64),
    Bool(bool),
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Literal::Str(s) => write!(f, "{s:?}"),
            Literal::Number(n) => write!(f, "{n}"),
            Literal::Bool(b) => f.write_str(if *b { "TRUE" } else { "FALSE" }),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Filter {
    Attr { name: String, index: usize, value: Literal },
    Property { pset: String, prop: String, value: Literal },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Selector {
    /// Uppercase class name.
    pub type_name: String,
    pub filters: Vec<Filter>,
}

fn split_top_level(s: &str, sep: char) -> Result<Vec<String>, SelectError> {
    let mut parts = Vec::new();
    let mut cur = String::new();
    let mut quote: Option<char> = None;
    for ch in s.chars() {
        match quote {
            Some(q) if ch == q => {
                quote = None;
                cur.push(ch);
            }
            Some(_) => cur.push(ch),
            None if ch == '"' || ch == '\'' => {
                quote = Some(ch);
                cur.push(ch);
            }
            None if ch == sep => parts.push(std::mem::take(&mut cur)),
            None => cur.push(ch),
        }
    }
    if quote.is_some() {
        return Err(SelectError::Syntax("unterminated quoted string".into()));
    }
    parts.push(cur);
    Ok(parts)
}

fn parse_literal(raw: &str) -> Result<Literal, SelectError> {
    let raw = raw.trim();
    if raw.is_empty() {
        return Err(SelectError::Syntax("missing literal after '='".into()));
    }
    let first = raw.chars().next().unwrap();
    if first == '"' || first == '\'' {
        if raw.len() < 2 || !raw.ends_with(first) {
            return Err(SelectError::Syntax(format!("malformed quoted literal {raw}")));
        }
        return Ok(Literal::Str(raw[1..raw.len() - 1].to_string()));
    }
    match raw.to_ascii_uppercase().as_str() {
        "TRUE" => return Ok(Literal::Bool(true)),
        "FALSE" => return Ok(Literal::Bool(false)),
        _ => {}
    }
    if let Ok(n) = raw.parse::<f64>() {
        return Ok(Literal::Number(n));
    }
    Ok(Literal::Str(raw.to_string()))
}

fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    chars.next().is_some_and(|c| c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

impl Selector {
    pub fn parse(text: &str) -> Result<Self, SelectError> {
        let parts = split_top_level(text, ',')?;
        let type_name = parts[0].trim();
        if !is_identifier(type_name) {
            return Err(SelectError::Syntax(format!("expected an IFC type name, found {type_name:?}")));
        }
        let type_name = type_name.to_ascii_uppercase();
        let mut filters = Vec::new();
        for part in &parts[1..] {
            let Some((lhs, rhs)) = part.split_once('=') else {
                return Err(SelectError::Syntax(format!("filter {:?} is missing '='", part.trim())));
            };
            let lhs = lhs.trim();
            let value = parse_literal(rhs)?;
            if let Some((pset, prop)) = lhs.split_once('.') {
                if !is_identifier(pset) || !is_identifier(prop) {
                    return Err(SelectError::Syntax(format!("malformed property path {lhs:?}")));
                }
                filters.push(Filter::Property { pset: pset.into(), prop: prop.into(), value });
            } else {
                if !is_identifier(lhs) {
                    return Err(SelectError::Syntax(format!("malformed attribute name {lhs:?}")));
                }
                let index = schema_table::attribute_index(&type_name, lhs).ok_or_else(|| {
                    SelectError::UnknownAttribute { type_name: type_name.clone(), attr: lhs.to_string() }
                })?;
                let name = schema_table::attribute_name(&type_name, index).unwrap_or(lhs).to_string();
                filters.push(Filter::Attr { name, index, value });
            }
        }
        Ok(Self { type_name, filters })
    }

    pub fn matches(&self, model: &IfcModel, entity: &IfcEntity) -> bool {
        if !entity.is_a(&self.type_name) {
            return false;
        }
        self.filters.iter().all(|f| match f {
            Filter::Attr { index, value, .. } => entity.attrs.get(*index).is_some_and(|v| literal_matches(v, value)),
            Filter::Property { pset, prop, value } => {
                property_value(model, entity.id, pset, prop).is_some_and(|v| literal_matches(&v, value))
            }
        })
    }
}

/// Compares an attribute value with a selector literal.
pub fn literal_matches(v: &SpfValue, lit: &Literal) -> bool {
    match (v, lit) {
        (SpfValue::Typed(_, inner), _) => literal_matches(inner, lit),
        (SpfValue::String(s), Literal::Str(l)) => s == l,
        (SpfValue::Enum(e), Literal::Str(l)) => e.eq_ignore_ascii_case(l.trim_matches('.')),
        (SpfValue::Enum(e), Literal::Bool(b)) => e == if *b { "T" } else { "F" },
        (SpfValue::Integer(i), Literal::Number(n)) => (*i as f64 - n).abs() <= 1e-9 * n.abs().max(1.0),
        (SpfValue::Real(r), Literal::Number(n)) => (r - n).abs() <= 1e-9 * n.abs().max(1.0),
        _ => false,
    }
}

/// Resolves `pset.prop` on an element through IfcRelDefinesByProperties,
/// covering both property sets (NominalValue) and element quantities.
pub fn property_value(model: &IfcModel, element: u64, pset: &str, prop: &str) -> Option<SpfValue> {
    for rel in model.of_type("IfcRelDefinesByProperties") {
        let related = rel.attrs.get(4).and_then(SpfValue::as_list).unwrap_or(&[]);
        if !related.iter().any(|r| r.as_ref_id() == Some(element)) {
            continue;
        }
        let Some(def) = rel.attrs.get(5).and_then(SpfValue::as_ref_id).and_then(|id| model.get(id)) else {
            continue;
        };
        if def.name() != Some(pset) {
            continue;
        }
        let members = if def.is_a("IfcPropertySet") {
            def.attrs.get(4)
        } else if def.is_a("IfcElementQuantity") {
            def.attrs.get(5)
        } else {
            None
        };
        for member in members.and_then(SpfValue::as_list).unwrap_or(&[]) {
            let Some(p) = member.as_ref_id().and_then(|id| model.get(id)) else { continue };
            if p.attrs.first().and_then(SpfValue::as_str) != Some(prop) {
                continue;
            }
            if p.is_a("IfcPropertySingleValue") {
                return p.attrs.get(2).cloned();
            }
            if p.is_a("IfcPhysicalSimpleQuantity") {
                return p.attrs.get(3).cloned();
            }
        }
    }
    None
}

/// Parses and evaluates a selector; results are ordered by id.
pub fn select<'m>(model: &'m IfcModel, selector: &str) -> Result<Vec<&'m IfcEntity>, SelectError> {
    let sel = Selector::parse(selector)?;
    Ok(select_parsed(model, &sel))
}

pub fn select_parsed<'m>(model: &'m IfcModel, sel: &Selector) -> Vec<&'m IfcEntity> {
    model.iter().filter(|e| sel.matches(model, e)).collect()
}
