use std::collections::{BTreeMap, HashMap};

use bimcp::ifc::guid;
use bimcp::ifc::{entity_diff, IfcModel, SpfValue};
use bimcp::schemas::{ChangeCounts, ChangeKind, DiffRaw};
use num_bigint::BigUint;
use rand::Rng;

// Naive oracle: expands every reference into the full text of its target
// (rooted targets collapse to their GlobalId) and compares key sets directly.
pub fn expand_value(m: &IfcModel, v: &SpfValue) -> String {
    match v {
        SpfValue::Ref(id) => expand_entity(m, *id),
        SpfValue::List(items) => {
            format!("[{}]", items.iter().map(|i| expand_value(m, i)).collect::<Vec<_>>().join(";"))
        }
        SpfValue::Typed(n, inner) => format!("{n}<{}>", expand_value(m, inner)),
        other => other.to_spf(),
    }
}

pub fn expand_entity(m: &IfcModel, id: u64) -> String {
    let e = m.get(id).unwrap();
    if e.is_rooted() {
        return format!("G{}", e.global_id().unwrap());
    }
    format!("{}{{{}}}", e.type_name, e.attrs.iter().map(|a| expand_value(m, a)).collect::<Vec<_>>().join(";"))
}

pub struct Oracle {
    pub per_type: BTreeMap<String, ChangeCounts>,
    pub modified: BTreeMap<String, Vec<usize>>,
}

pub fn oracle(old: &IfcModel, new: &IfcModel) -> Oracle {
    let mut per_type: BTreeMap<String, ChangeCounts> = BTreeMap::new();
    let mut modified = BTreeMap::new();
    let rooted = |m: &IfcModel| -> HashMap<String, u64> {
        m.iter().filter(|e| e.is_rooted()).map(|e| (e.global_id().unwrap().to_string(), e.id)).collect()
    };
    let (ro, rn) = (rooted(old), rooted(new));
    for (g, &id) in &ro {
        let o = old.get(id).unwrap();
        match rn.get(g) {
            None => per_type.entry(o.type_name.clone()).or_default().removed += 1,
            Some(&nid) => {
                let n = new.get(nid).unwrap();
                let idx: Vec<usize> = (0..o.attrs.len().max(n.attrs.len()))
                    .filter(|&i| {
                        let a = o.attrs.get(i).map(|v| expand_value(old, v));
                        let b = n.attrs.get(i).map(|v| expand_value(new, v));
                        a != b
                    })
                    .collect();
                if !idx.is_empty() {
                    per_type.entry(n.type_name.clone()).or_default().modified += 1;
                    modified.insert(g.clone(), idx);
                }
            }
        }
    }
    for (g, &id) in &rn {
        if !ro.contains_key(g) {
            per_type.entry(new.get(id).unwrap().type_name.clone()).or_default().added += 1;
        }
    }
    let unrooted = |m: &IfcModel| -> HashMap<(String, String), usize> {
        let mut out = HashMap::new();
        for e in m.iter().filter(|e| !e.is_rooted()) {
            *out.entry((e.type_name.clone(), expand_entity(m, e.id))).or_insert(0) += 1;
        }
        out
    };
    let (uo, un) = (unrooted(old), unrooted(new));
    for (k, &c) in &uo {
        let d = c.saturating_sub(un.get(k).copied().unwrap_or(0));
        if d > 0 {
            per_type.entry(k.0.clone()).or_default().removed += d;
        }
    }
    for (k, &c) in &un {
        let d = c.saturating_sub(uo.get(k).copied().unwrap_or(0));
        if d > 0 {
            per_type.entry(k.0.clone()).or_default().added += d;
        }
    }
    Oracle { per_type, modified }
}

pub fn assert_matches_oracle(old: &IfcModel, new: &IfcModel) -> DiffRaw {
    let d = entity_diff(old, new);
    d.check_invariants().unwrap();
    let o = oracle(old, new);
    assert_eq!(d.summarize().per_type, o.per_type);
    let got: BTreeMap<String, Vec<usize>> = d
        .entries
        .iter()
        .filter(|e| e.change_kind == ChangeKind::Modified)
        .map(|e| (e.entity_key.clone(), e.changed_attributes.iter().map(|c| c.attr_index).collect()))
        .collect();
    assert_eq!(got, o.modified);
    d
}

// Independent codec: repeated division of an arbitrary-precision integer.
pub fn oracle_encode(x: u128) -> String {
    let mut n = BigUint::from(x);
    let base = BigUint::from(64u32);
    let mut digits = Vec::new();
    for _ in 0..22 {
        let d = (&n % &base).to_u32_digits().first().copied().unwrap_or(0);
        digits.push(guid::ALPHABET[d as usize] as char);
        n /= &base;
    }
    digits.iter().rev().collect()
}

pub fn oracle_decode(s: &str) -> u128 {
    let mut n = BigUint::from(0u32);
    for c in s.bytes() {
        let d = guid::ALPHABET.iter().position(|&a| a == c).unwrap();
        n = n * 64u32 + BigUint::from(d);
    }
    let digits = n.to_u64_digits();
    digits.first().copied().unwrap_or(0) as u128 | (digits.get(1).copied().unwrap_or(0) as u128) << 64
}

/// Byte positions of the signed fields: bucket and key in the path, and the
/// values (not names) of the query parameters.
pub fn signed_positions(url: &str) -> Vec<usize> {
    let start = url.find("/bucket/").unwrap() + "/bucket/".len();
    let q = url.find('?').unwrap();
    let mut out: Vec<usize> = (start..q).collect();
    for pair in url[q + 1..].split('&') {
        let offset = pair.as_ptr() as usize - url.as_ptr() as usize;
        let eq = pair.find('=').unwrap();
        out.extend(offset + eq + 1..offset + pair.len());
    }
    out.retain(|&i| url.as_bytes()[i].is_ascii_alphanumeric());
    out
}

/// Replaces one character inside a signed field of a presigned URL.
pub fn mutate(url: &str, positions: &[usize], rng: &mut impl Rng) -> String {
    const POOL: &[u8] = b"0123456789abcdefABCDEFxyz";
    loop {
        let i = positions[rng.gen_range(0..positions.len())];
        let r = POOL[rng.gen_range(0..POOL.len())] as char;
        if r == url.as_bytes()[i] as char {
            continue;
        }
        let mut out = url.to_string();
        out.replace_range(i..i + 1, &r.to_string());
        return out;
    }
}
