//! High-level modelling tools of the native backend.

use std::collections::{BTreeSet, HashSet};

use serde::Deserialize;
use serde_json::{json, Value};

use super::build::{self, en, label, opt_label, real, Builder};
use crate::exec::AdapterError;
use crate::ifc::select::{select_parsed, Selector};
use crate::ifc::{IfcModel, SpfValue};

use SpfValue::{Derived, Ref, Unset};

const EPS: f64 = 1e-9;

/// Rounds away float noise such as `6.1e-17` from trigonometry.
fn clean(v: f64) -> f64 {
    let r = (v * 1e12).round() / 1e12;
    if r == 0.0 {
        0.0
    } else {
        r
    }
}

fn gid(m: &IfcModel, id: u64) -> String {
    m.get(id).and_then(|e| e.global_id()).unwrap_or_default().to_string()
}

fn unique_name(m: &IfcModel, class: &str, stem: &str) -> String {
    let taken: HashSet<&str> = m.of_type(class).filter_map(|e| e.name()).collect();
    let mut n = m.of_type(class).count() + 1;
    loop {
        let candidate = format!("{stem} {n}");
        if !taken.contains(candidate.as_str()) {
            return candidate;
        }
        n += 1;
    }
}

fn selector(text: &str) -> Result<Selector, AdapterError> {
    Selector::parse(text).map_err(|e| AdapterError::params(e.to_string()))
}

fn placement_of(m: &IfcModel, product: u64) -> Option<u64> {
    m.get(product)?.attr("ObjectPlacement")?.as_ref_id()
}

/// Removes `id` when nothing references it any more.
fn drop_if_orphan(m: &mut IfcModel, id: u64) {
    if !m.iter().any(|e| e.refs().any(|r| r == id)) {
        m.remove(id);
    }
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct CreateProject {
    name: String,
    site_name: Option<String>,
    building_name: Option<String>,
    description: Option<String>,
}

pub fn create_project(b: &mut Builder, p: CreateProject) -> Result<Value, AdapterError> {
    if b.m.of_type("IfcProject").next().is_some() {
        return Err(AdapterError::precondition("model already contains an IfcProject"));
    }
    let units: Vec<u64> = [
        ("LENGTHUNIT", "METRE"),
        ("AREAUNIT", "SQUARE_METRE"),
        ("VOLUMEUNIT", "CUBIC_METRE"),
        ("PLANEANGLEUNIT", "RADIAN"),
    ]
    .iter()
    .map(|(ty, name)| b.add("IFCSIUNIT", vec![Derived, en(ty), Unset, en(name)]))
    .collect();
    let assignment = b.add("IFCUNITASSIGNMENT", vec![SpfValue::refs(units)]);
    let world = b.axis3((0.0, 0.0, 0.0), None);
    let north = b.dir2(0.0, 1.0);
    let ctx = b.add(
        "IFCGEOMETRICREPRESENTATIONCONTEXT",
        vec![Unset, label("Model"), SpfValue::Integer(3), real(1e-5), Ref(world), Ref(north)],
    );
    b.add(
        "IFCGEOMETRICREPRESENTATIONSUBCONTEXT",
        vec![
            label("Body"),
            label("Model"),
            Derived,
            Derived,
            Derived,
            Derived,
            Ref(ctx),
            Unset,
            en("MODEL_VIEW"),
            Unset,
        ],
    );
    let project = b.rooted(
        "IFCPROJECT",
        Some(&p.name),
        vec![opt_label(p.description.as_deref()), Unset, Unset, Unset, SpfValue::refs([ctx]), Ref(assignment)],
    );
    let site_pl = b.local_placement(None, (0.0, 0.0, 0.0), None);
    let site_name = p.site_name.as_deref().unwrap_or("Default Site");
    let site = b.rooted(
        "IFCSITE",
        Some(site_name),
        vec![Unset, Unset, Ref(site_pl), Unset, Unset, en("ELEMENT"), Unset, Unset, Unset, Unset, Unset],
    );
    let building_pl = b.local_placement(Some(site_pl), (0.0, 0.0, 0.0), None);
    let building_name = p.building_name.as_deref().unwrap_or("Default Building");
    let building = b.rooted(
        "IFCBUILDING",
        Some(building_name),
        vec![Unset, Unset, Ref(building_pl), Unset, Unset, en("ELEMENT"), Unset, Unset, Unset],
    );
    b.aggregate(project, site);
    b.aggregate(site, building);
    Ok(json!({
        "globalId": gid(b.m, project),
        "site": gid(b.m, site),
        "building": gid(b.m, building),
    }))
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct Georeference {
    latitude: f64,
    longitude: f64,
    elevation: Option<f64>,
    true_north: Option<f64>,
}

fn dms_value(deg: f64) -> SpfValue {
    SpfValue::List(build::degrees_to_dms(deg).into_iter().map(SpfValue::Integer).collect())
}

pub fn georeference(b: &mut Builder, p: Georeference) -> Result<Value, AdapterError> {
    let site = build::single(b.m, "IfcSite")?;
    let e = b.m.get_mut(site).expect("site exists");
    e.attrs[9] = dms_value(p.latitude);
    e.attrs[10] = dms_value(p.longitude);
    if let Some(z) = p.elevation {
        e.attrs[11] = real(z);
    }
    if let Some(angle) = p.true_north {
        let ctx =
            b.m.of_type("IfcGeometricRepresentationContext")
                .find(|c| c.type_name == "IFCGEOMETRICREPRESENTATIONCONTEXT")
                .map(|c| c.id)
                .ok_or_else(|| AdapterError::precondition("model has no geometric representation context"))?;
        let rad = angle.to_radians();
        let dir = b.dir2(clean(-rad.sin()), clean(rad.cos()));
        let old = std::mem::replace(&mut b.m.get_mut(ctx).expect("context exists").attrs[5], Ref(dir));
        if let Some(old) = old.as_ref_id() {
            drop_if_orphan(b.m, old);
        }
    }
    Ok(json!({
        "globalId": gid(b.m, site),
        "refLatitude": build::degrees_to_dms(p.latitude),
        "refLongitude": build::degrees_to_dms(p.longitude),
    }))
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct AddStorey {
    name: String,
    elevation: f64,
    building_ref: Option<String>,
}

/// Children of `parent` through IfcRelAggregates.
fn aggregated(m: &IfcModel, parent: u64) -> Vec<u64> {
    m.of_type("IfcRelAggregates")
        .filter(|r| r.attrs.get(4).and_then(SpfValue::as_ref_id) == Some(parent))
        .flat_map(|r| build::list_refs(m, r.id, 5))
        .collect()
}

pub fn add_storey(b: &mut Builder, p: AddStorey) -> Result<Value, AdapterError> {
    let building = match &p.building_ref {
        Some(r) => build::resolve(b.m, r, "IfcBuilding")?,
        None => build::single(b.m, "IfcBuilding")?,
    };
    let clash = aggregated(b.m, building)
        .into_iter()
        .filter_map(|id| b.m.get(id))
        .any(|e| e.is_a("IfcBuildingStorey") && e.name() == Some(p.name.as_str()));
    if clash {
        return Err(AdapterError::precondition(format!("storey {:?} already exists in this building", p.name)));
    }
    let rel_to = placement_of(b.m, building);
    let pl = b.local_placement(rel_to, (0.0, 0.0, p.elevation), None);
    let storey = b.rooted(
        "IFCBUILDINGSTOREY",
        Some(&p.name),
        vec![Unset, Unset, Ref(pl), Unset, Unset, en("ELEMENT"), real(p.elevation)],
    );
    b.aggregate(building, storey);
    Ok(json!({ "globalId": gid(b.m, storey), "name": p.name, "elevation": p.elevation }))
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct CreateWall {
    storey_ref: String,
    start: [f64; 2],
    end: [f64; 2],
    height: f64,
    thickness: f64,
    name: Option<String>,
}

pub fn create_wall(b: &mut Builder, p: CreateWall) -> Result<Value, AdapterError> {
    let storey = build::resolve(b.m, &p.storey_ref, "IfcBuildingStorey")?;
    let (dx, dy) = (p.end[0] - p.start[0], p.end[1] - p.start[1]);
    let length = dx.hypot(dy);
    if length <= EPS {
        return Err(AdapterError::params("wall start and end points coincide"));
    }
    if p.height <= 0.0 || p.thickness <= 0.0 {
        return Err(AdapterError::params("wall height and thickness must be positive"));
    }
    let ctx = build::body_context(b.m)?;
    let name = p.name.clone().unwrap_or_else(|| unique_name(b.m, "IfcWall", "Wall"));
    let rel_to = placement_of(b.m, storey);
    let pl = b.local_placement(rel_to, (p.start[0], p.start[1], 0.0), Some((clean(dx / length), clean(dy / length))));
    let profile = b.rect_profile(length, p.thickness, length / 2.0, 0.0);
    let shape = b.extruded_body(ctx, profile, p.height, 0.0);
    let wall = b.rooted("IFCWALL", Some(&name), vec![Unset, Unset, Ref(pl), Ref(shape), Unset, en("STANDARD")]);
    b.contain(storey, wall);
    Ok(json!({ "globalId": gid(b.m, wall), "name": name, "length": length }))
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct CreateSlab {
    storey_ref: String,
    polygon: Vec<[f64; 2]>,
    thickness: f64,
    name: Option<String>,
}

pub fn polygon_area(pts: &[(f64, f64)]) -> f64 {
    let n = pts.len();
    (0..n).map(|i| pts[i].0 * pts[(i + 1) % n].1 - pts[(i + 1) % n].0 * pts[i].1).sum::<f64>() / 2.0
}

pub fn create_slab(b: &mut Builder, p: CreateSlab) -> Result<Value, AdapterError> {
    let storey = build::resolve(b.m, &p.storey_ref, "IfcBuildingStorey")?;
    let mut pts: Vec<(f64, f64)> = p.polygon.iter().map(|q| (q[0], q[1])).collect();
    if pts.len() > 1 && pts.first() == pts.last() {
        pts.pop();
    }
    if pts.len() < 3 {
        return Err(AdapterError::params("slab outline needs at least three distinct points"));
    }
    let area = polygon_area(&pts).abs();
    if area <= EPS {
        return Err(AdapterError::params("slab outline encloses no area"));
    }
    if p.thickness <= 0.0 {
        return Err(AdapterError::params("slab thickness must be positive"));
    }
    let ctx = build::body_context(b.m)?;
    let name = p.name.clone().unwrap_or_else(|| unique_name(b.m, "IfcSlab", "Slab"));
    let rel_to = placement_of(b.m, storey);
    let pl = b.local_placement(rel_to, (0.0, 0.0, 0.0), None);
    let profile = b.polygon_profile(&pts);
    let shape = b.extruded_body(ctx, profile, p.thickness, -p.thickness);
    let slab = b.rooted("IFCSLAB", Some(&name), vec![Unset, Unset, Ref(pl), Ref(shape), Unset, en("FLOOR")]);
    b.contain(storey, slab);
    Ok(json!({ "globalId": gid(b.m, slab), "name": name, "area": area }))
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct AddDoor {
    wall_ref: String,
    offset_along_wall: f64,
    width: f64,
    height: f64,
    name: Option<String>,
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct AddWindow {
    wall_ref: String,
    offset: f64,
    width: f64,
    height: f64,
    sill_height: f64,
    name: Option<String>,
}

#[derive(Clone, Copy)]
enum Filler {
    Door,
    Window,
}

/// Host wall rectangle in wall-local coordinates: offsets along the axis and heights.
struct Rect {
    x: f64,
    w: f64,
    z: f64,
    h: f64,
}

impl Rect {
    fn overlaps(&self, o: &Rect) -> bool {
        self.x < o.x + o.w - EPS
            && o.x < self.x + self.w - EPS
            && self.z < o.z + o.h - EPS
            && o.z < self.z + self.h - EPS
    }
}

fn existing_openings(m: &IfcModel, wall: u64) -> Vec<Rect> {
    m.of_type("IfcRelVoidsElement")
        .filter(|r| r.attrs.get(4).and_then(SpfValue::as_ref_id) == Some(wall))
        .filter_map(|r| r.attrs.get(5).and_then(SpfValue::as_ref_id))
        .filter_map(|op| {
            let (x, _, z) = build::placement_location(m, placement_of(m, op)?)?;
            let body = build::box_body(m, op)?;
            Some(Rect { x, w: body.xdim, z, h: body.depth })
        })
        .collect()
}

fn container_of(m: &IfcModel, element: u64) -> Option<u64> {
    m.of_type("IfcRelContainedInSpatialStructure")
        .find(|r| build::list_refs(m, r.id, 4).contains(&element))
        .and_then(|r| r.attrs.get(5).and_then(SpfValue::as_ref_id))
}

fn insert_filler(
    b: &mut Builder,
    kind: Filler,
    wall_ref: &str,
    cut: Rect,
    name: Option<String>,
) -> Result<Value, AdapterError> {
    let wall = build::resolve(b.m, wall_ref, "IfcWall")?;
    let body = build::box_body(b.m, wall)
        .ok_or_else(|| AdapterError::precondition("wall body is not a rectangular extrusion; cannot place openings"))?;
    if cut.w <= 0.0 || cut.h <= 0.0 {
        return Err(AdapterError::params("opening width and height must be positive"));
    }
    if cut.x < 0.0 || cut.z < 0.0 || cut.x + cut.w > body.xdim + EPS || cut.z + cut.h > body.depth + EPS {
        return Err(AdapterError::precondition(format!(
            "opening exceeds wall (wall is {} m long and {} m high)",
            body.xdim, body.depth
        )));
    }
    if existing_openings(b.m, wall).iter().any(|o| o.overlaps(&cut)) {
        return Err(AdapterError::precondition("opening overlaps an existing opening in this wall"));
    }
    let ctx = build::body_context(b.m)?;
    let wall_pl = placement_of(b.m, wall);

    let op_pl = b.local_placement(wall_pl, (cut.x, 0.0, cut.z), None);
    let op_profile = b.rect_profile(cut.w, body.ydim, cut.w / 2.0, 0.0);
    let op_shape = b.extruded_body(ctx, op_profile, cut.h, 0.0);
    let opening = b.rooted(
        "IFCOPENINGELEMENT",
        Some("Opening"),
        vec![Unset, Unset, Ref(op_pl), Ref(op_shape), Unset, en("OPENING")],
    );
    b.rooted("IFCRELVOIDSELEMENT", None, vec![Unset, Ref(wall), Ref(opening)]);

    let (class, stem, predefined, operation) = match kind {
        Filler::Door => ("IFCDOOR", "Door", "DOOR", "NOTDEFINED"),
        Filler::Window => ("IFCWINDOW", "Window", "WINDOW", "SINGLE_PANEL"),
    };
    let name = name.unwrap_or_else(|| unique_name(b.m, class, stem));
    let panel = body.ydim.min(0.05);
    let pl = b.local_placement(Some(op_pl), (0.0, 0.0, 0.0), None);
    let profile = b.rect_profile(cut.w, panel, cut.w / 2.0, 0.0);
    let shape = b.extruded_body(ctx, profile, cut.h, 0.0);
    let filler = b.rooted(
        class,
        Some(&name),
        vec![Unset, Unset, Ref(pl), Ref(shape), Unset, real(cut.h), real(cut.w), en(predefined), en(operation), Unset],
    );
    b.rooted("IFCRELFILLSELEMENT", None, vec![Unset, Ref(opening), Ref(filler)]);
    if let Some(storey) = container_of(b.m, wall) {
        b.contain(storey, filler);
    }
    Ok(json!({ "globalId": gid(b.m, filler), "name": name, "opening": gid(b.m, opening), "wall": gid(b.m, wall) }))
}

pub fn add_door(b: &mut Builder, p: AddDoor) -> Result<Value, AdapterError> {
    let cut = Rect { x: p.offset_along_wall, w: p.width, z: 0.0, h: p.height };
    insert_filler(b, Filler::Door, &p.wall_ref, cut, p.name)
}

pub fn add_window(b: &mut Builder, p: AddWindow) -> Result<Value, AdapterError> {
    let cut = Rect { x: p.offset, w: p.width, z: p.sill_height, h: p.height };
    insert_filler(b, Filler::Window, &p.wall_ref, cut, p.name)
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct SetProperty {
    selector: String,
    pset_name: String,
    prop_name: String,
    value: Value,
}

pub fn property_value(v: &Value) -> Result<SpfValue, AdapterError> {
    Ok(match v {
        Value::Bool(b) => SpfValue::typed("IFCBOOLEAN", SpfValue::boolean(*b)),
        Value::Number(n) if n.is_i64() => SpfValue::typed("IFCINTEGER", SpfValue::Integer(n.as_i64().unwrap())),
        Value::Number(n) => SpfValue::typed("IFCREAL", SpfValue::Real(n.as_f64().unwrap_or(0.0))),
        Value::String(s) => SpfValue::typed("IFCLABEL", SpfValue::string(s.clone())),
        other => return Err(AdapterError::params(format!("unsupported property value {other}"))),
    })
}

/// The property set named `pset` attached to `element`: (relation id, pset id).
fn find_pset(m: &IfcModel, element: u64, pset: &str) -> Option<(u64, u64)> {
    m.of_type("IfcRelDefinesByProperties").find_map(|r| {
        if !build::list_refs(m, r.id, 4).contains(&element) {
            return None;
        }
        let def = r.attrs.get(5)?.as_ref_id()?;
        let e = m.get(def)?;
        (e.is_a("IfcPropertySet") && e.name() == Some(pset)).then_some((r.id, def))
    })
}

fn single_value(b: &mut Builder, name: &str, value: &SpfValue) -> u64 {
    b.add("IFCPROPERTYSINGLEVALUE", vec![label(name), Unset, value.clone(), Unset])
}

pub fn set_property(b: &mut Builder, p: SetProperty) -> Result<Value, AdapterError> {
    let sel = selector(&p.selector)?;
    let targets: Vec<u64> =
        select_parsed(b.m, &sel).into_iter().filter(|e| e.is_a("IfcObjectDefinition")).map(|e| e.id).collect();
    if targets.is_empty() {
        return Err(AdapterError::precondition(format!("selector {:?} matched no elements", p.selector)));
    }
    let value = property_value(&p.value)?;
    for &el in &targets {
        match find_pset(b.m, el, &p.pset_name) {
            Some((rel, pset)) if build::list_refs(b.m, rel, 4) == [el] => {
                let props = build::list_refs(b.m, pset, 4);
                let existing = props.iter().copied().find(|&id| {
                    b.m.get(id).and_then(|e| e.attrs.first()).and_then(SpfValue::as_str) == Some(p.prop_name.as_str())
                });
                let fresh = single_value(b, &p.prop_name, &value);
                let mut list: Vec<u64> = props.iter().copied().filter(|&id| Some(id) != existing).collect();
                list.push(fresh);
                b.m.get_mut(pset).expect("pset exists").attrs[4] = SpfValue::refs(list);
                if let Some(old) = existing {
                    drop_if_orphan(b.m, old);
                }
            }
            Some((rel, pset)) => {
                // Shared set: give this element its own copy.
                let mut list = Vec::new();
                for prop in build::list_refs(b.m, pset, 4) {
                    let Some(e) = b.m.get(prop).cloned() else { continue };
                    if e.attrs.first().and_then(SpfValue::as_str) == Some(p.prop_name.as_str()) {
                        continue;
                    }
                    list.push(b.add(&e.type_name, e.attrs.clone()));
                }
                list.push(single_value(b, &p.prop_name, &value));
                let copy = b.rooted("IFCPROPERTYSET", Some(&p.pset_name), vec![Unset, SpfValue::refs(list)]);
                b.rooted("IFCRELDEFINESBYPROPERTIES", None, vec![Unset, SpfValue::refs([el]), Ref(copy)]);
                let remaining: Vec<u64> = build::list_refs(b.m, rel, 4).into_iter().filter(|&id| id != el).collect();
                b.m.get_mut(rel).expect("rel exists").attrs[4] = SpfValue::refs(remaining);
            }
            None => {
                let prop = single_value(b, &p.prop_name, &value);
                let pset = b.rooted("IFCPROPERTYSET", Some(&p.pset_name), vec![Unset, SpfValue::refs([prop])]);
                b.rooted("IFCRELDEFINESBYPROPERTIES", None, vec![Unset, SpfValue::refs([el]), Ref(pset)]);
            }
        }
    }
    let ids: Vec<String> = targets.iter().map(|&id| gid(b.m, id)).collect();
    Ok(json!({ "count": ids.len(), "updated": ids }))
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct DeleteElements {
    selector: String,
}

/// Relations whose relating side is `id`, with the index of the related side.
const HOSTED: &[(&str, usize, usize)] =
    &[("IfcRelVoidsElement", 4, 5), ("IfcRelFillsElement", 4, 5), ("IfcRelAggregates", 4, 5)];

pub fn delete_elements(b: &mut Builder, p: DeleteElements) -> Result<Value, AdapterError> {
    let sel = selector(&p.selector)?;
    let matched = select_parsed(b.m, &sel);
    if let Some(e) = matched.iter().find(|e| !e.is_a("IfcElement")) {
        return Err(AdapterError::precondition(format!(
            "delete_elements only removes IfcElement subtypes; selector matched {}",
            e.type_name
        )));
    }
    if matched.is_empty() {
        return Err(AdapterError::precondition(format!("selector {:?} matched no elements", p.selector)));
    }
    let primary: Vec<u64> = matched.iter().map(|e| e.id).collect();

    // Hosted openings, their fillings and element parts go with their host.
    let mut doomed: BTreeSet<u64> = BTreeSet::new();
    let mut work = primary.clone();
    while let Some(id) = work.pop() {
        if !doomed.insert(id) {
            continue;
        }
        for (class, relating, related) in HOSTED {
            for rel in b.m.of_type(class) {
                if rel.attrs.get(*relating).and_then(SpfValue::as_ref_id) == Some(id) {
                    work.extend(build::list_refs(b.m, rel.id, *related));
                    work.extend(rel.attrs.get(*related).and_then(SpfValue::as_ref_id));
                }
            }
        }
    }
    let removed_gids: Vec<String> = doomed.iter().map(|&id| gid(b.m, id)).collect();

    let mut dead_rels = BTreeSet::new();
    let rel_ids: Vec<u64> = b.m.of_type("IfcRelationship").map(|e| e.id).collect();
    for rel in rel_ids {
        let e = b.m.get_mut(rel).expect("rel exists");
        for attr in e.attrs.iter_mut() {
            match attr {
                SpfValue::Ref(r) if doomed.contains(r) => {
                    dead_rels.insert(rel);
                }
                SpfValue::List(items) if items.iter().any(|i| i.as_ref_id().is_some_and(|r| doomed.contains(&r))) => {
                    items.retain(|i| !i.as_ref_id().is_some_and(|r| doomed.contains(&r)));
                    if items.is_empty() {
                        dead_rels.insert(rel);
                    }
                }
                _ => {}
            }
        }
    }

    let gone: Vec<u64> = doomed.iter().chain(dead_rels.iter()).copied().collect();
    let candidates = b.m.reachable_from(gone.iter().copied());
    for id in &gone {
        b.m.remove(*id);
    }
    // Unshared geometry and property sets left behind are collected; other
    // rooted entities stay and keep whatever they reference.
    let roots: Vec<u64> =
        b.m.iter()
            .filter(|e| e.is_rooted() && !(candidates.contains(&e.id) && e.is_a("IfcPropertySetDefinition")))
            .map(|e| e.id)
            .collect();
    let keep = b.m.reachable_from(roots);
    for id in candidates {
        if !keep.contains(&id) {
            b.m.remove(id);
        }
    }
    Ok(json!({ "count": removed_gids.len(), "deleted": removed_gids }))
}
