//! IFC-level model differencing.
//!
//! Rooted entities are keyed by GlobalId. Unrooted entities are keyed by a
//! structural fingerprint: SHA-256 over `TYPE(attrs)` where each reference is
//! replaced by `@g:<GlobalId>` (rooted target), `@f:<fingerprint>` (unrooted
//! target) or `@c:<distance>` when it closes a cycle. Identical unrooted
//! entities share a fingerprint; the n-th extra copy is keyed `<fp>:<n>`.
//!
//! Unrooted entities never appear as `modified`: a changed geometry entity
//! has a new fingerprint, so it shows as removed + added, and the rooted owner
//! whose reference now resolves differently is reported as modified.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use sha2::{Digest, Sha256};

use super::model::{IfcEntity, IfcModel};
use super::value::SpfValue;
use crate::schemas::{ChangeKind, ChangedAttribute, DiffEntry, DiffRaw};

/// Resolves references to canonical tokens for one model.
pub struct Fingerprinter<'m> {
    model: &'m IfcModel,
    memo: HashMap<u64, String>,
    stack: Vec<u64>,
}

impl<'m> Fingerprinter<'m> {
    pub fn new(model: &'m IfcModel) -> Self {
        Self { model, memo: HashMap::new(), stack: Vec::new() }
    }

    /// Fingerprint of an unrooted entity.
    pub fn fingerprint(&mut self, id: u64) -> String {
        self.fingerprint_inner(id).0
    }

    /// Returns the fingerprint and the shallowest stack depth referenced by a
    /// cycle back-edge inside it (usize::MAX if none).
    fn fingerprint_inner(&mut self, id: u64) -> (String, usize) {
        if let Some(fp) = self.memo.get(&id) {
            return (fp.clone(), usize::MAX);
        }
        let Some(entity) = self.model.get(id) else {
            return ("missing".to_string(), usize::MAX);
        };
        let depth = self.stack.len();
        self.stack.push(id);
        let mut text = String::with_capacity(64);
        text.push_str(&entity.type_name);
        text.push('(');
        let mut low = usize::MAX;
        for (i, a) in entity.attrs.iter().enumerate() {
            if i > 0 {
                text.push(',');
            }
            low = low.min(self.canon(a, &mut text));
        }
        text.push(')');
        self.stack.pop();
        let fp = hex::encode(Sha256::digest(text.as_bytes()));
        // Cycle members are recomputed on every visit so that their value
        // never depends on where the walk entered the cycle.
        if low > depth {
            self.memo.insert(id, fp.clone());
        }
        if low >= depth {
            low = usize::MAX;
        }
        (fp, low)
    }

    fn ref_token(&mut self, id: u64, out: &mut String) -> usize {
        if let Some(pos) = self.stack.iter().position(|&s| s == id) {
            let _ = write!(out, "@c:{}", self.stack.len() - pos);
            return pos;
        }
        match self.model.get(id) {
            Some(e) if e.is_rooted() => {
                out.push_str("@g:");
                out.push_str(e.global_id().unwrap_or(""));
                usize::MAX
            }
            Some(_) => {
                let (fp, low) = self.fingerprint_inner(id);
                out.push_str("@f:");
                out.push_str(&fp);
                low
            }
            None => {
                let _ = write!(out, "@x:{id}");
                usize::MAX
            }
        }
    }

    /// Writes the canonical form of a value, resolving references.
    fn canon(&mut self, v: &SpfValue, out: &mut String) -> usize {
        match v {
            SpfValue::Ref(id) => self.ref_token(*id, out),
            SpfValue::List(items) => {
                out.push('(');
                let mut low = usize::MAX;
                for (i, item) in items.iter().enumerate() {
                    if i > 0 {
                        out.push(',');
                    }
                    low = low.min(self.canon(item, out));
                }
                out.push(')');
                low
            }
            SpfValue::Typed(name, inner) => {
                out.push_str(name);
                out.push('(');
                let low = self.canon(inner, out);
                out.push(')');
                low
            }
            other => {
                other.write_spf(out);
                usize::MAX
            }
        }
    }

    /// Canonical, id-independent form of one attribute value.
    pub fn canonical_value(&mut self, v: &SpfValue) -> String {
        let mut out = String::new();
        self.canon(v, &mut out);
        out
    }
}

/// Assigns diff keys to every entity in a model.
fn keyed_entities<'m>(model: &'m IfcModel, fp: &mut Fingerprinter<'m>) -> BTreeMap<String, &'m IfcEntity> {
    let mut out = BTreeMap::new();
    let mut seen: HashMap<String, usize> = HashMap::new();
    for e in model.iter() {
        let base = match e.global_id() {
            Some(g) => g.to_string(),
            None => fp.fingerprint(e.id),
        };
        let n = seen.entry(base.clone()).or_insert(0);
        let key = if *n == 0 { base } else { format!("{base}:{n}") };
        *n += 1;
        out.insert(key, e);
    }
    out
}

fn changed_attributes(
    old: &IfcEntity,
    new: &IfcEntity,
    fo: &mut Fingerprinter<'_>,
    fn_: &mut Fingerprinter<'_>,
) -> Vec<ChangedAttribute> {
    let retyped = old.type_name != new.type_name;
    let n = old.attrs.len().max(new.attrs.len());
    let mut out = Vec::new();
    for i in 0..n {
        let a = old.attrs.get(i);
        let b = new.attrs.get(i);
        let differs = retyped
            || match (a, b) {
                (Some(a), Some(b)) => fo.canonical_value(a) != fn_.canonical_value(b),
                _ => true,
            };
        if differs {
            out.push(ChangedAttribute {
                attr_index: i,
                attr_name: new.attr_label(i),
                before: a.map(SpfValue::to_spf).unwrap_or_default(),
                after: b.map(SpfValue::to_spf).unwrap_or_default(),
            });
        }
    }
    out
}

/// Computes the IFC-level differences from `old` to `new`.
///
/// Entries are ordered by change kind, then class name, then key.
pub fn entity_diff(old: &IfcModel, new: &IfcModel) -> DiffRaw {
    let mut fo = Fingerprinter::new(old);
    let mut fn_ = Fingerprinter::new(new);
    let ko = keyed_entities(old, &mut fo);
    let kn = keyed_entities(new, &mut fn_);

    let mut entries = Vec::new();
    for (key, o) in &ko {
        match kn.get(key) {
            None => entries.push(DiffEntry {
                entity_key: key.clone(),
                entity_type: o.type_name.clone(),
                change_kind: ChangeKind::Removed,
                changed_attributes: Vec::new(),
            }),
            Some(n) if o.is_rooted() || n.is_rooted() => {
                let changed = changed_attributes(o, n, &mut fo, &mut fn_);
                if !changed.is_empty() {
                    entries.push(DiffEntry {
                        entity_key: key.clone(),
                        entity_type: n.type_name.clone(),
                        change_kind: ChangeKind::Modified,
                        changed_attributes: changed,
                    });
                }
            }
            Some(_) => {}
        }
    }
    for (key, n) in &kn {
        if !ko.contains_key(key) {
            entries.push(DiffEntry {
                entity_key: key.clone(),
                entity_type: n.type_name.clone(),
                change_kind: ChangeKind::Added,
                changed_attributes: Vec::new(),
            });
        }
    }
    entries.sort_by(|a, b| {
        (a.change_kind, &a.entity_type, &a.entity_key).cmp(&(b.change_kind, &b.entity_type, &b.entity_key))
    });
    DiffRaw::new(entries)
}
