//! JSON-schema validation for the bundled wire schemas and tool input schemas.
//!
//! Supports the draft 2020-12 keywords the bundled documents use: `type`,
//! `enum`, `const`, `properties`, `required`, `additionalProperties`,
//! `items`, `minItems`, `maxItems`, `minLength`, `maxLength`, `pattern`,
//! `minimum`, `maximum`, `exclusiveMinimum`, `exclusiveMaximum`, `allOf`,
//! `anyOf`, `oneOf`, `not` and local `$ref` into `$defs`. Annotation keywords
//! are ignored. [`check_schema`] rejects documents using anything else.

use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};

use regex::Regex;
use serde::{Deserialize, Serialize};
use serde_json::Value;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SchemaViolation {
    /// JSON pointer to the offending location in the instance.
    pub path: String,
    pub keyword: String,
    pub message: String,
}

const ASSERTIONS: &[&str] = &[
    "type",
    "enum",
    "const",
    "properties",
    "required",
    "additionalProperties",
    "items",
    "minItems",
    "maxItems",
    "minLength",
    "maxLength",
    "pattern",
    "minimum",
    "maximum",
    "exclusiveMinimum",
    "exclusiveMaximum",
    "allOf",
    "anyOf",
    "oneOf",
    "not",
    "$ref",
];

const ANNOTATIONS: &[&str] =
    &["$schema", "$id", "$defs", "$comment", "title", "description", "default", "examples", "format"];

fn regex(pattern: &str) -> Option<Regex> {
    static CACHE: OnceLock<Mutex<HashMap<String, Option<Regex>>>> = OnceLock::new();
    let mut cache = CACHE.get_or_init(Default::default).lock().expect("regex cache");
    cache.entry(pattern.to_string()).or_insert_with(|| Regex::new(pattern).ok()).clone()
}

fn escape_pointer(token: &str) -> String {
    token.replace('~', "~0").replace('/', "~1")
}

fn type_matches(name: &str, v: &Value) -> bool {
    match name {
        "null" => v.is_null(),
        "boolean" => v.is_boolean(),
        "object" => v.is_object(),
        "array" => v.is_array(),
        "string" => v.is_string(),
        "number" => v.is_number(),
        "integer" => match v {
            Value::Number(n) => n.is_i64() || n.is_u64() || n.as_f64().is_some_and(|f| f.fract() == 0.0),
            _ => false,
        },
        _ => false,
    }
}

/// Numeric-aware equality (1 and 1.0 are the same JSON number).
fn json_eq(a: &Value, b: &Value) -> bool {
    match (a, b) {
        (Value::Number(x), Value::Number(y)) => match (x.as_f64(), y.as_f64()) {
            (Some(x), Some(y)) => x == y,
            _ => x == y,
        },
        (Value::Array(x), Value::Array(y)) => x.len() == y.len() && x.iter().zip(y).all(|(a, b)| json_eq(a, b)),
        (Value::Object(x), Value::Object(y)) => {
            x.len() == y.len() && x.iter().all(|(k, v)| y.get(k).is_some_and(|w| json_eq(v, w)))
        }
        _ => a == b,
    }
}

fn type_name(v: &Value) -> &'static str {
    match v {
        Value::Null => "null",
        Value::Bool(_) => "boolean",
        Value::Number(_) => "number",
        Value::String(_) => "string",
        Value::Array(_) => "array",
        Value::Object(_) => "object",
    }
}

struct Validator<'s> {
    root: &'s Value,
    out: Vec<SchemaViolation>,
    depth: usize,
}

impl<'s> Validator<'s> {
    fn push(&mut self, path: &str, keyword: &str, message: String) {
        self.out.push(SchemaViolation { path: path.to_string(), keyword: keyword.to_string(), message });
    }

    fn resolve(&self, reference: &str) -> Option<&'s Value> {
        let pointer = reference.strip_prefix('#')?;
        self.root.pointer(pointer)
    }

    /// Validates `v` against `schema` in isolation, returning whether it passed.
    fn probe(&mut self, schema: &'s Value, v: &Value, path: &str) -> bool {
        let mut sub = Validator { root: self.root, out: Vec::new(), depth: self.depth };
        sub.validate(schema, v, path);
        sub.out.is_empty()
    }

    fn validate(&mut self, schema: &'s Value, v: &Value, path: &str) {
        let obj = match schema {
            Value::Bool(true) => return,
            Value::Bool(false) => return self.push(path, "false", "no value is allowed here".into()),
            Value::Object(o) => o,
            _ => return,
        };
        if self.depth > 64 {
            return self.push(path, "$ref", "schema nesting too deep".into());
        }

        if let Some(Value::String(r)) = obj.get("$ref") {
            match self.resolve(r) {
                Some(target) => {
                    self.depth += 1;
                    self.validate(target, v, path);
                    self.depth -= 1;
                }
                None => self.push(path, "$ref", format!("unresolvable reference {r}")),
            }
        }

        if let Some(t) = obj.get("type") {
            let ok = match t {
                Value::String(name) => type_matches(name, v),
                Value::Array(names) => names.iter().filter_map(Value::as_str).any(|n| type_matches(n, v)),
                _ => true,
            };
            if !ok {
                self.push(path, "type", format!("expected {t}, found {}", type_name(v)));
                return;
            }
        }
        if let Some(Value::Array(options)) = obj.get("enum") {
            if !options.iter().any(|o| json_eq(o, v)) {
                self.push(path, "enum", format!("{v} is not one of {}", Value::Array(options.clone())));
            }
        }
        if let Some(c) = obj.get("const") {
            if !json_eq(c, v) {
                self.push(path, "const", format!("expected {c}"));
            }
        }

        match v {
            Value::Object(map) => {
                if let Some(Value::Array(req)) = obj.get("required") {
                    for name in req.iter().filter_map(Value::as_str) {
                        if !map.contains_key(name) {
                            let p = format!("{path}/{}", escape_pointer(name));
                            self.push(&p, "required", format!("missing required property {name:?}"));
                        }
                    }
                }
                let props = obj.get("properties").and_then(Value::as_object);
                for (k, val) in map {
                    let p = format!("{path}/{}", escape_pointer(k));
                    if let Some(s) = props.and_then(|ps| ps.get(k)) {
                        self.validate(s, val, &p);
                    } else if let Some(extra) = obj.get("additionalProperties") {
                        if extra == &Value::Bool(false) {
                            self.push(&p, "additionalProperties", format!("property {k:?} is not allowed"));
                        } else {
                            self.validate(extra, val, &p);
                        }
                    }
                }
            }
            Value::Array(items) => {
                if let Some(min) = obj.get("minItems").and_then(Value::as_u64) {
                    if (items.len() as u64) < min {
                        self.push(path, "minItems", format!("expected at least {min} items"));
                    }
                }
                if let Some(max) = obj.get("maxItems").and_then(Value::as_u64) {
                    if items.len() as u64 > max {
                        self.push(path, "maxItems", format!("expected at most {max} items"));
                    }
                }
                if let Some(s) = obj.get("items") {
                    for (i, item) in items.iter().enumerate() {
                        self.validate(s, item, &format!("{path}/{i}"));
                    }
                }
            }
            Value::String(s) => {
                let len = s.chars().count() as u64;
                if let Some(min) = obj.get("minLength").and_then(Value::as_u64) {
                    if len < min {
                        self.push(path, "minLength", format!("expected at least {min} characters"));
                    }
                }
                if let Some(max) = obj.get("maxLength").and_then(Value::as_u64) {
                    if len > max {
                        self.push(path, "maxLength", format!("expected at most {max} characters"));
                    }
                }
                if let Some(Value::String(pat)) = obj.get("pattern") {
                    match regex(pat) {
                        Some(re) if re.is_match(s) => {}
                        Some(_) => self.push(path, "pattern", format!("does not match {pat:?}")),
                        None => self.push(path, "pattern", format!("invalid pattern {pat:?}")),
                    }
                }
            }
            Value::Number(n) => {
                let x = n.as_f64().unwrap_or(0.0);
                let bound = |k: &str| obj.get(k).and_then(Value::as_f64);
                if let Some(m) = bound("minimum").filter(|m| x < *m) {
                    self.push(path, "minimum", format!("{x} is less than the minimum {m}"));
                }
                if let Some(m) = bound("maximum").filter(|m| x > *m) {
                    self.push(path, "maximum", format!("{x} is greater than the maximum {m}"));
                }
                if let Some(m) = bound("exclusiveMinimum").filter(|m| x <= *m) {
                    self.push(path, "exclusiveMinimum", format!("{x} must be greater than {m}"));
                }
                if let Some(m) = bound("exclusiveMaximum").filter(|m| x >= *m) {
                    self.push(path, "exclusiveMaximum", format!("{x} must be less than {m}"));
                }
            }
            _ => {}
        }

        if let Some(Value::Array(all)) = obj.get("allOf") {
            for s in all {
                self.validate(s, v, path);
            }
        }
        if let Some(Value::Array(any)) = obj.get("anyOf") {
            if !any.iter().any(|s| self.probe(s, v, path)) {
                self.push(path, "anyOf", "does not match any allowed alternative".into());
            }
        }
        if let Some(Value::Array(one)) = obj.get("oneOf") {
            let passing: Vec<usize> =
                one.iter().enumerate().filter(|(_, s)| self.probe(s, v, path)).map(|(i, _)| i).collect();
            match passing.len() {
                1 => {}
                0 => self.push(path, "oneOf", "does not match any alternative".into()),
                _ => self.push(path, "oneOf", format!("matches alternatives {passing:?}, expected exactly one")),
            }
        }
        if let Some(not) = obj.get("not") {
            if self.probe(not, v, path) {
                self.push(path, "not", "matches a forbidden schema".into());
            }
        }
    }
}

/// Validates an instance; an empty list means it conforms.
pub fn validate(schema: &Value, instance: &Value) -> Vec<SchemaViolation> {
    let mut v = Validator { root: schema, out: Vec::new(), depth: 0 };
    v.validate(schema, instance, "");
    v.out
}

pub fn is_valid(schema: &Value, instance: &Value) -> bool {
    validate(schema, instance).is_empty()
}

/// Checks that a schema document only uses supported keywords, well-typed.
pub fn check_schema(schema: &Value) -> Result<(), String> {
    fn walk(root: &Value, s: &Value, at: &str) -> Result<(), String> {
        let obj = match s {
            Value::Bool(_) => return Ok(()),
            Value::Object(o) => o,
            _ => return Err(format!("{at}: schema must be an object or boolean")),
        };
        for (k, val) in obj {
            let here = format!("{at}/{k}");
            if !ASSERTIONS.contains(&k.as_str()) && !ANNOTATIONS.contains(&k.as_str()) {
                return Err(format!("{here}: unsupported keyword"));
            }
            match k.as_str() {
                "type" => {
                    let names: Vec<&Value> = match val {
                        Value::Array(a) => a.iter().collect(),
                        other => vec![other],
                    };
                    for n in names {
                        let ok = n.as_str().is_some_and(|n| {
                            ["null", "boolean", "object", "array", "string", "number", "integer"].contains(&n)
                        });
                        if !ok {
                            return Err(format!("{here}: invalid type {n}"));
                        }
                    }
                }
                "properties" | "$defs" => {
                    let Some(map) = val.as_object() else { return Err(format!("{here}: expected an object")) };
                    for (name, sub) in map {
                        walk(root, sub, &format!("{here}/{name}"))?;
                    }
                }
                "required" | "enum" => {
                    let Some(items) = val.as_array() else { return Err(format!("{here}: expected an array")) };
                    if k == "required" && !items.iter().all(Value::is_string) {
                        return Err(format!("{here}: expected property names"));
                    }
                }
                "additionalProperties" | "items" | "not" => walk(root, val, &here)?,
                "allOf" | "anyOf" | "oneOf" => {
                    let Some(items) = val.as_array().filter(|a| !a.is_empty()) else {
                        return Err(format!("{here}: expected a non-empty array"));
                    };
                    for (i, sub) in items.iter().enumerate() {
                        walk(root, sub, &format!("{here}/{i}"))?;
                    }
                }
                "minItems" | "maxItems" | "minLength" | "maxLength" => {
                    if val.as_u64().is_none() {
                        return Err(format!("{here}: expected a non-negative integer"));
                    }
                }
                "minimum" | "maximum" | "exclusiveMinimum" | "exclusiveMaximum" => {
                    if !val.is_number() {
                        return Err(format!("{here}: expected a number"));
                    }
                }
                "pattern" => {
                    if val.as_str().and_then(regex).is_none() {
                        return Err(format!("{here}: invalid regular expression"));
                    }
                }
                "$ref" => {
                    let target = val.as_str().and_then(|r| r.strip_prefix('#')).and_then(|p| root.pointer(p));
                    if target.is_none() {
                        return Err(format!("{here}: unresolvable reference"));
                    }
                }
                _ => {}
            }
        }
        Ok(())
    }
    walk(schema, schema, "")
}
