//! Attribute values of STEP Physical File instances.

use std::fmt::{self, Write as _};

/// A single attribute value as it appears in a DATA section instance.
#[derive(Debug, Clone, PartialEq)]
pub enum SpfValue {
    Integer(i64),
    Real(f64),
    /// Decoded string contents (escapes already resolved).
    String(String),
    /// Enumeration name without the surrounding dots, e.g. `T` or `ELEMENT`.
    Enum(String),
    /// Binary literal digits, kept verbatim (first char is the unused-bit count).
    Binary(String),
    Ref(u64),
    List(Vec<SpfValue>),
    Unset,
    Derived,
    Typed(String, Box<SpfValue>),
}

impl SpfValue {
    pub fn string(s: impl Into<String>) -> Self {
        SpfValue::String(s.into())
    }

    pub fn enumeration(s: impl Into<String>) -> Self {
        SpfValue::Enum(s.into())
    }

    pub fn boolean(b: bool) -> Self {
        SpfValue::Enum(if b { "T" } else { "F" }.to_string())
    }

    pub fn typed(type_name: impl Into<String>, inner: SpfValue) -> Self {
        SpfValue::Typed(type_name.into().to_ascii_uppercase(), Box::new(inner))
    }

    pub fn reals<I: IntoIterator<Item = f64>>(values: I) -> Self {
        SpfValue::List(values.into_iter().map(SpfValue::Real).collect())
    }

    pub fn refs<I: IntoIterator<Item = u64>>(ids: I) -> Self {
        SpfValue::List(ids.into_iter().map(SpfValue::Ref).collect())
    }

    pub fn as_str(&self) -> Option<&str> {
        match self {
            SpfValue::String(s) => Some(s),
            SpfValue::Typed(_, inner) => inner.as_str(),
            _ => None,
        }
    }

    pub fn as_ref_id(&self) -> Option<u64> {
        match self {
            SpfValue::Ref(id) => Some(*id),
            _ => None,
        }
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            SpfValue::Real(v) => Some(*v),
            SpfValue::Integer(v) => Some(*v as f64),
            SpfValue::Typed(_, inner) => inner.as_f64(),
            _ => None,
        }
    }

    pub fn as_list(&self) -> Option<&[SpfValue]> {
        match self {
            SpfValue::List(items) => Some(items),
            _ => None,
        }
    }

    pub fn is_unset(&self) -> bool {
        matches!(self, SpfValue::Unset)
    }

    /// Visits every entity reference contained in this value, depth first.
    pub fn for_each_ref(&self, f: &mut impl FnMut(u64)) {
        match self {
            SpfValue::Ref(id) => f(*id),
            SpfValue::List(items) => items.iter().for_each(|v| v.for_each_ref(f)),
            SpfValue::Typed(_, inner) => inner.for_each_ref(f),
            _ => {}
        }
    }

    pub fn refs_iter(&self) -> Vec<u64> {
        let mut out = Vec::new();
        self.for_each_ref(&mut |id| out.push(id));
        out
    }

    /// Rewrites every reference in place.
    pub fn map_refs(&mut self, f: &mut impl FnMut(u64) -> u64) {
        match self {
            SpfValue::Ref(id) => *id = f(*id),
            SpfValue::List(items) => items.iter_mut().for_each(|v| v.map_refs(f)),
            SpfValue::Typed(_, inner) => inner.map_refs(f),
            _ => {}
        }
    }

    /// Removes list members that reference `id`. Returns true if anything was removed.
    pub fn remove_ref_from_lists(&mut self, id: u64) -> bool {
        match self {
            SpfValue::List(items) => {
                let before = items.len();
                items.retain(|v| v.as_ref_id() != Some(id));
                let mut changed = items.len() != before;
                for item in items.iter_mut() {
                    changed |= item.remove_ref_from_lists(id);
                }
                changed
            }
            _ => false,
        }
    }

    /// The canonical SPF token for this value.
    pub fn to_spf(&self) -> String {
        let mut out = String::new();
        self.write_spf(&mut out);
        out
    }

    pub fn write_spf(&self, out: &mut String) {
        match self {
            SpfValue::Integer(v) => {
                let _ = write!(out, "{v}");
            }
            SpfValue::Real(v) => out.push_str(&format_real(*v)),
            SpfValue::String(s) => encode_string(s, out),
            SpfValue::Enum(name) => {
                out.push('.');
                out.push_str(name);
                out.push('.');
            }
            SpfValue::Binary(digits) => {
                out.push('"');
                out.push_str(digits);
                out.push('"');
            }
            SpfValue::Ref(id) => {
                let _ = write!(out, "#{id}");
            }
            SpfValue::List(items) => {
                out.push('(');
                for (i, item) in items.iter().enumerate() {
                    if i > 0 {
                        out.push(',');
                    }
                    item.write_spf(out);
                }
                out.push(')');
            }
            SpfValue::Unset => out.push('$'),
            SpfValue::Derived => out.push('*'),
            SpfValue::Typed(name, inner) => {
                out.push_str(name);
                out.push('(');
                inner.write_spf(out);
                out.push(')');
            }
        }
    }
}

impl fmt::Display for SpfValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_spf())
    }
}

/// Formats a real in SPF syntax using the shortest representation that
/// round-trips: `2.` for 2.0, `2.5`, `1.E-05`-style exponents for very small or
/// large magnitudes.
pub fn format_real(v: f64) -> String {
    if !v.is_finite() {
        // Not representable in SPF; callers never construct these.
        return "0.".to_string();
    }
    let sci = format!("{v:e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-4..15).contains(&exp) {
        let mut plain = format!("{v}");
        if !plain.contains('.') {
            plain.push('.');
        }
        plain
    } else {
        let mut m = mantissa.to_string();
        if !m.contains('.') {
            m.push('.');
        }
        format!("{m}E{exp}")
    }
}

/// Encodes a string literal including quotes, using `\X2\`/`\X4\` for
/// anything outside printable ASCII.
pub fn encode_string(s: &str, out: &mut String) {
    out.push('\'');
    let mut wide: Vec<u32> = Vec::new();
    let flush = |wide: &mut Vec<u32>, out: &mut String| {
        if wide.is_empty() {
            return;
        }
        if wide.iter().all(|&c| c <= 0xFFFF) {
            out.push_str("\\X2\\");
            for c in wide.iter() {
                let _ = write!(out, "{c:04X}");
            }
        } else {
            out.push_str("\\X4\\");
            for c in wide.iter() {
                let _ = write!(out, "{c:08X}");
            }
        }
        out.push_str("\\X0\\");
        wide.clear();
    };
    for ch in s.chars() {
        let c = ch as u32;
        if (0x20..=0x7E).contains(&c) {
            flush(&mut wide, out);
            match ch {
                '\'' => out.push_str("''"),
                '\\' => out.push_str("\\\\"),
                _ => out.push(ch),
            }
        } else {
            // Mixing BMP and astral characters in one run would force \X4\ on
            // all of them; split runs so each stays minimal.
            if let Some(&last) = wide.last() {
                if (last <= 0xFFFF) != (c <= 0xFFFF) {
                    flush(&mut wide, out);
                }
            }
            wide.push(c);
        }
    }
    flush(&mut wide, out);
    out.push('\'');
}
