//! In-memory IFC entity graph.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use super::guid;
use super::schema_table;
use super::value::SpfValue;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SchemaId {
    Ifc4,
    Ifc2x3,
}

impl SchemaId {
    pub fn as_str(self) -> &'static str {
        match self {
            SchemaId::Ifc4 => "IFC4",
            SchemaId::Ifc2x3 => "IFC2X3",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_uppercase().as_str() {
            "IFC4" => Some(SchemaId::Ifc4),
            "IFC2X3" => Some(SchemaId::Ifc2x3),
            _ => None,
        }
    }
}

impl fmt::Display for SchemaId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// HEADER section contents. Unset scalar fields are normalised to empty strings.
#[derive(Debug, Clone, PartialEq)]
pub struct Header {
    pub description: Vec<String>,
    pub implementation_level: String,
    pub name: String,
    pub timestamp: String,
    pub author: Vec<String>,
    pub organization: Vec<String>,
    pub preprocessor_version: String,
    /// FILE_NAME originating_system, i.e. the authoring tool.
    pub authoring_tool: String,
    pub authorization: String,
    pub schema: SchemaId,
    /// Any further header entities, kept verbatim.
    pub extra: Vec<(String, Vec<SpfValue>)>,
}

impl Header {
    pub fn new(schema: SchemaId) -> Self {
        Self {
            description: vec!["ViewDefinition [DesignTransferView]".to_string()],
            implementation_level: "2;1".to_string(),
            name: String::new(),
            timestamp: String::new(),
            author: vec![String::new()],
            organization: vec![String::new()],
            preprocessor_version: concat!("bimcp ", env!("CARGO_PKG_VERSION")).to_string(),
            authoring_tool: concat!("bimcp ", env!("CARGO_PKG_VERSION")).to_string(),
            authorization: String::new(),
            schema,
            extra: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IfcEntity {
    pub id: u64,
    /// Uppercase class name, e.g. `IFCWALL`.
    pub type_name: String,
    pub attrs: Vec<SpfValue>,
}

impl IfcEntity {
    pub fn new(id: u64, type_name: &str, attrs: Vec<SpfValue>) -> Self {
        Self { id, type_name: type_name.to_ascii_uppercase(), attrs }
    }

    /// Rooted entities are IfcRoot subtypes. Classes missing from the bundled
    /// table count as rooted when their first attribute is a valid GlobalId.
    pub fn is_rooted(&self) -> bool {
        match schema_table::is_rooted_type(&self.type_name) {
            Some(rooted) => rooted,
            None => self.attrs.first().and_then(SpfValue::as_str).is_some_and(guid::is_valid),
        }
    }

    pub fn global_id(&self) -> Option<&str> {
        if self.is_rooted() {
            self.attrs.first().and_then(SpfValue::as_str)
        } else {
            None
        }
    }

    pub fn is_a(&self, ancestor: &str) -> bool {
        schema_table::is_subtype_of(&self.type_name, ancestor)
    }

    pub fn attr(&self, name: &str) -> Option<&SpfValue> {
        let idx = schema_table::attribute_index(&self.type_name, name)?;
        self.attrs.get(idx)
    }

    pub fn attr_mut(&mut self, name: &str) -> Option<&mut SpfValue> {
        let idx = schema_table::attribute_index(&self.type_name, name)?;
        self.attrs.get_mut(idx)
    }

    pub fn name(&self) -> Option<&str> {
        if self.is_rooted() {
            self.attrs.get(2).and_then(SpfValue::as_str)
        } else {
            self.attr("Name").and_then(SpfValue::as_str)
        }
    }

    /// Attribute name for diagnostics, falling back to a positional label.
    pub fn attr_label(&self, index: usize) -> String {
        schema_table::attribute_name(&self.type_name, index)
            .map(str::to_string)
            .unwrap_or_else(|| format!("attr{index}"))
    }

    pub fn refs(&self) -> impl Iterator<Item = u64> + '_ {
        self.attrs.iter().flat_map(|a| a.refs_iter())
    }

    pub fn to_spf(&self) -> String {
        let mut out = format!("#{}={}(", self.id, self.type_name);
        for (i, a) in self.attrs.iter().enumerate() {
            if i > 0 {
                out.push(',');
            }
            a.write_spf(&mut out);
        }
        out.push_str(");");
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SourcePos {
    pub line: usize,
    pub column: usize,
}

impl fmt::Display for SourcePos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}, column {}", self.line, self.column)
    }
}

#[derive(Debug, Clone)]
pub struct IfcModel {
    pub header: Header,
    pub entities: BTreeMap<u64, IfcEntity>,
    pub next_id: u64,
    /// Where each instance started in the source text, when parsed.
    pub positions: HashMap<u64, SourcePos>,
}

impl PartialEq for IfcModel {
    fn eq(&self, other: &Self) -> bool {
        self.header == other.header && self.entities == other.entities
    }
}

impl IfcModel {
    pub fn new(schema: SchemaId) -> Self {
        Self::with_header(Header::new(schema))
    }

    pub fn with_header(header: Header) -> Self {
        Self { header, entities: BTreeMap::new(), next_id: 1, positions: HashMap::new() }
    }

    pub fn schema(&self) -> SchemaId {
        self.header.schema
    }

    pub fn len(&self) -> usize {
        self.entities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entities.is_empty()
    }

    pub fn add(&mut self, type_name: &str, attrs: Vec<SpfValue>) -> u64 {
        let id = self.next_id;
        self.insert(IfcEntity::new(id, type_name, attrs));
        id
    }

    /// Inserts an entity with an explicit id, replacing any existing one.
    pub fn insert(&mut self, entity: IfcEntity) {
        self.next_id = self.next_id.max(entity.id + 1);
        self.entities.insert(entity.id, entity);
    }

    pub fn get(&self, id: u64) -> Option<&IfcEntity> {
        self.entities.get(&id)
    }

    pub fn get_mut(&mut self, id: u64) -> Option<&mut IfcEntity> {
        self.entities.get_mut(&id)
    }

    pub fn remove(&mut self, id: u64) -> Option<IfcEntity> {
        self.positions.remove(&id);
        self.entities.remove(&id)
    }

    pub fn iter(&self) -> impl Iterator<Item = &IfcEntity> {
        self.entities.values()
    }

    /// Entities whose class is `type_name` or one of its subtypes.
    pub fn of_type<'a>(&'a self, type_name: &'a str) -> impl Iterator<Item = &'a IfcEntity> + 'a {
        self.entities.values().filter(move |e| e.is_a(type_name))
    }

    pub fn by_global_id(&self, gid: &str) -> Option<&IfcEntity> {
        self.entities.values().find(|e| e.global_id() == Some(gid))
    }

    pub fn global_ids(&self) -> BTreeSet<String> {
        self.entities.values().filter_map(|e| e.global_id().map(str::to_string)).collect()
    }

    /// Inverse reference index: target id -> ids of entities that reference it.
    pub fn referrers(&self) -> HashMap<u64, Vec<u64>> {
        let mut inv: HashMap<u64, Vec<u64>> = HashMap::new();
        for e in self.entities.values() {
            for r in e.refs() {
                let list = inv.entry(r).or_default();
                if list.last() != Some(&e.id) {
                    list.push(e.id);
                }
            }
        }
        inv
    }

    /// (source id, missing target id) for every reference that does not resolve.
    pub fn dangling_refs(&self) -> Vec<(u64, u64)> {
        let mut out = Vec::new();
        for e in self.entities.values() {
            for r in e.refs() {
                if !self.entities.contains_key(&r) {
                    out.push((e.id, r));
                }
            }
        }
        out
    }

    /// Ids reachable from `roots` by following references.
    pub fn reachable_from(&self, roots: impl IntoIterator<Item = u64>) -> BTreeSet<u64> {
        let mut seen = BTreeSet::new();
        let mut stack: Vec<u64> = roots.into_iter().collect();
        while let Some(id) = stack.pop() {
            if !seen.insert(id) {
                continue;
            }
            if let Some(e) = self.entities.get(&id) {
                stack.extend(e.refs().filter(|r| !seen.contains(r)));
            }
        }
        seen
    }

    /// Count of entities per class name.
    pub fn type_counts(&self) -> BTreeMap<String, usize> {
        let mut out = BTreeMap::new();
        for e in self.entities.values() {
            *out.entry(e.type_name.clone()).or_insert(0) += 1;
        }
        out
    }
}
