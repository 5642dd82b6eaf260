//! Entity construction and lookup helpers for the native tools.

use crate::exec::AdapterError;
use crate::ifc::guid::{self, GuidGenerator};
use crate::ifc::{IfcModel, SpfValue};

use SpfValue::{Enum, Ref, Unset};

pub struct Builder<'a> {
    pub m: &'a mut IfcModel,
    pub guids: &'a mut GuidGenerator,
}

pub fn real(v: f64) -> SpfValue {
    SpfValue::Real(v)
}

pub fn label(s: &str) -> SpfValue {
    SpfValue::string(s)
}

pub fn opt_label(s: Option<&str>) -> SpfValue {
    s.map(label).unwrap_or(Unset)
}

pub fn en(s: &str) -> SpfValue {
    Enum(s.to_string())
}

impl<'a> Builder<'a> {
    pub fn new(m: &'a mut IfcModel, guids: &'a mut GuidGenerator) -> Self {
        Self { m, guids }
    }

    pub fn add(&mut self, ty: &str, attrs: Vec<SpfValue>) -> u64 {
        self.m.add(ty, attrs)
    }

    /// Adds an IfcRoot subtype: GlobalId, no owner history, then `rest` after Name.
    pub fn rooted(&mut self, ty: &str, name: Option<&str>, rest: Vec<SpfValue>) -> u64 {
        let mut attrs = vec![label(&self.guids.next_guid()), Unset, opt_label(name)];
        attrs.extend(rest);
        self.m.add(ty, attrs)
    }

    pub fn point3(&mut self, x: f64, y: f64, z: f64) -> u64 {
        self.add("IFCCARTESIANPOINT", vec![SpfValue::reals([x, y, z])])
    }

    pub fn point2(&mut self, x: f64, y: f64) -> u64 {
        self.add("IFCCARTESIANPOINT", vec![SpfValue::reals([x, y])])
    }

    pub fn dir3(&mut self, x: f64, y: f64, z: f64) -> u64 {
        self.add("IFCDIRECTION", vec![SpfValue::reals([x, y, z])])
    }

    pub fn dir2(&mut self, x: f64, y: f64) -> u64 {
        self.add("IFCDIRECTION", vec![SpfValue::reals([x, y])])
    }

    /// Placement at `loc`; with `x_axis` the local X axis is rotated in plan.
    pub fn axis3(&mut self, loc: (f64, f64, f64), x_axis: Option<(f64, f64)>) -> u64 {
        let p = self.point3(loc.0, loc.1, loc.2);
        match x_axis {
            Some((dx, dy)) => {
                let z = self.dir3(0.0, 0.0, 1.0);
                let x = self.dir3(dx, dy, 0.0);
                self.add("IFCAXIS2PLACEMENT3D", vec![Ref(p), Ref(z), Ref(x)])
            }
            None => self.add("IFCAXIS2PLACEMENT3D", vec![Ref(p), Unset, Unset]),
        }
    }

    pub fn axis2(&mut self, x: f64, y: f64) -> u64 {
        let p = self.point2(x, y);
        self.add("IFCAXIS2PLACEMENT2D", vec![Ref(p), Unset])
    }

    pub fn local_placement(&mut self, rel_to: Option<u64>, loc: (f64, f64, f64), x_axis: Option<(f64, f64)>) -> u64 {
        let a = self.axis3(loc, x_axis);
        self.add("IFCLOCALPLACEMENT", vec![rel_to.map(Ref).unwrap_or(Unset), Ref(a)])
    }

    /// Rectangle of `xdim` by `ydim` whose local origin sits at (`cx`, `cy`).
    pub fn rect_profile(&mut self, xdim: f64, ydim: f64, cx: f64, cy: f64) -> u64 {
        let pos = self.axis2(cx, cy);
        self.add("IFCRECTANGLEPROFILEDEF", vec![en("AREA"), Unset, Ref(pos), real(xdim), real(ydim)])
    }

    pub fn polygon_profile(&mut self, pts: &[(f64, f64)]) -> u64 {
        let mut ids: Vec<u64> = pts.iter().map(|&(x, y)| self.point2(x, y)).collect();
        ids.push(ids[0]);
        let line = self.add("IFCPOLYLINE", vec![SpfValue::refs(ids)]);
        self.add("IFCARBITRARYCLOSEDPROFILEDEF", vec![en("AREA"), Unset, Ref(line)])
    }

    /// Body shape: `profile` extruded along +Z by `depth`, starting at height `z0`.
    pub fn extruded_body(&mut self, context: u64, profile: u64, depth: f64, z0: f64) -> u64 {
        let pos = self.axis3((0.0, 0.0, z0), None);
        let dir = self.dir3(0.0, 0.0, 1.0);
        let solid = self.add("IFCEXTRUDEDAREASOLID", vec![Ref(profile), Ref(pos), Ref(dir), real(depth)]);
        let rep = self.add(
            "IFCSHAPEREPRESENTATION",
            vec![Ref(context), label("Body"), label("SweptSolid"), SpfValue::refs([solid])],
        );
        self.add("IFCPRODUCTDEFINITIONSHAPE", vec![Unset, Unset, SpfValue::refs([rep])])
    }

    /// Adds `child` under `parent`, extending an existing aggregation if there is one.
    pub fn aggregate(&mut self, parent: u64, child: u64) {
        let existing = self
            .m
            .of_type("IfcRelAggregates")
            .find(|r| r.attrs.get(4).and_then(SpfValue::as_ref_id) == Some(parent))
            .map(|r| r.id);
        match existing {
            Some(rel) => push_ref(self.m, rel, 5, child),
            None => {
                self.rooted("IFCRELAGGREGATES", None, vec![Unset, Ref(parent), SpfValue::refs([child])]);
            }
        }
    }

    /// Places `element` in `structure`, extending an existing containment if there is one.
    pub fn contain(&mut self, structure: u64, element: u64) {
        let existing = self
            .m
            .of_type("IfcRelContainedInSpatialStructure")
            .find(|r| r.attrs.get(5).and_then(SpfValue::as_ref_id) == Some(structure))
            .map(|r| r.id);
        match existing {
            Some(rel) => push_ref(self.m, rel, 4, element),
            None => {
                self.rooted(
                    "IFCRELCONTAINEDINSPATIALSTRUCTURE",
                    None,
                    vec![Unset, SpfValue::refs([element]), Ref(structure)],
                );
            }
        }
    }
}

fn push_ref(m: &mut IfcModel, rel: u64, index: usize, id: u64) {
    if let Some(SpfValue::List(items)) = m.get_mut(rel).and_then(|e| e.attrs.get_mut(index)) {
        items.push(Ref(id));
    }
}

/// Resolves an element reference: `#id`, a GlobalId, or a unique Name among `class`.
pub fn resolve(m: &IfcModel, text: &str, class: &str) -> Result<u64, AdapterError> {
    let text = text.trim();
    let found = if let Some(id) = text.strip_prefix('#').and_then(|n| n.parse::<u64>().ok()) {
        m.get(id).map(|e| e.id)
    } else if text.len() == guid::GUID_LEN && guid::is_valid(text) && m.by_global_id(text).is_some() {
        m.by_global_id(text).map(|e| e.id)
    } else {
        let named: Vec<u64> = m.of_type(class).filter(|e| e.name() == Some(text)).map(|e| e.id).collect();
        match named.len() {
            0 => None,
            1 => Some(named[0]),
            n => {
                return Err(AdapterError::precondition(format!(
                    "{n} {class} entities are named {text:?}; use a GlobalId"
                )))
            }
        }
    };
    match found {
        Some(id) if m.get(id).is_some_and(|e| e.is_a(class)) => Ok(id),
        Some(id) => Err(AdapterError::precondition(format!(
            "{text:?} is a {}, not an {class}",
            m.get(id).map(|e| e.type_name.as_str()).unwrap_or("?")
        ))),
        None => Err(AdapterError::precondition(format!("{class} {text:?} not found"))),
    }
}

pub fn single(m: &IfcModel, class: &str) -> Result<u64, AdapterError> {
    let all: Vec<u64> = m.of_type(class).map(|e| e.id).collect();
    match all.as_slice() {
        [one] => Ok(*one),
        [] => Err(AdapterError::precondition(format!("model has no {class}; call create_project first"))),
        _ => Err(AdapterError::precondition(format!("model has {} {class} entities; name one explicitly", all.len()))),
    }
}

pub fn attr_ref(m: &IfcModel, id: u64, index: usize) -> Option<u64> {
    m.get(id)?.attrs.get(index)?.as_ref_id()
}

pub fn list_refs(m: &IfcModel, id: u64, index: usize) -> Vec<u64> {
    m.get(id)
        .and_then(|e| e.attrs.get(index))
        .and_then(SpfValue::as_list)
        .map(|l| l.iter().filter_map(SpfValue::as_ref_id).collect())
        .unwrap_or_default()
}

pub fn coords(m: &IfcModel, point: u64) -> Option<Vec<f64>> {
    let list = m.get(point)?.attrs.first()?.as_list()?;
    list.iter().map(SpfValue::as_f64).collect()
}

/// Location of a local placement relative to its parent placement.
pub fn placement_location(m: &IfcModel, placement: u64) -> Option<(f64, f64, f64)> {
    let axis = attr_ref(m, placement, 1)?;
    let c = coords(m, attr_ref(m, axis, 0)?)?;
    Some((c[0], c.get(1).copied().unwrap_or(0.0), c.get(2).copied().unwrap_or(0.0)))
}

/// Representation context for body geometry: the `Body` subcontext, else the
/// first 3D model context.
pub fn body_context(m: &IfcModel) -> Result<u64, AdapterError> {
    if let Some(sub) = m
        .of_type("IfcGeometricRepresentationSubContext")
        .find(|e| e.attrs.first().and_then(SpfValue::as_str) == Some("Body"))
    {
        return Ok(sub.id);
    }
    m.of_type("IfcGeometricRepresentationContext")
        .next()
        .map(|e| e.id)
        .ok_or_else(|| AdapterError::precondition("model has no geometric representation context"))
}

/// Dimensions of a rectangular extruded body.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoxBody {
    pub xdim: f64,
    pub ydim: f64,
    pub depth: f64,
}

pub fn box_body(m: &IfcModel, product: u64) -> Option<BoxBody> {
    let shape = m.get(product)?.attr("Representation")?.as_ref_id()?;
    for rep in list_refs(m, shape, 2) {
        for item in list_refs(m, rep, 3) {
            let solid = m.get(item)?;
            if solid.type_name != "IFCEXTRUDEDAREASOLID" {
                continue;
            }
            let profile = m.get(solid.attrs.first()?.as_ref_id()?)?;
            if profile.type_name != "IFCRECTANGLEPROFILEDEF" {
                continue;
            }
            return Some(BoxBody {
                xdim: profile.attrs.get(3)?.as_f64()?,
                ydim: profile.attrs.get(4)?.as_f64()?,
                depth: solid.attrs.get(3)?.as_f64()?,
            });
        }
    }
    None
}

/// Decimal degrees to an IfcCompoundPlaneAngleMeasure (deg, min, sec, millionths).
/// All components carry the sign of the input.
pub fn degrees_to_dms(deg: f64) -> [i64; 4] {
    let total = (deg.abs() * 3_600_000_000.0).round() as i64;
    let sign = if deg < 0.0 { -1 } else { 1 };
    let d = total / 3_600_000_000;
    let mn = (total / 60_000_000) % 60;
    let s = (total / 1_000_000) % 60;
    let us = total % 1_000_000;
    [sign * d, sign * mn, sign * s, sign * us]
}
