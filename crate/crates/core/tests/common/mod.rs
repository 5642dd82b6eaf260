#![allow(dead_code)]

use bimcp::ifc::guid::GuidGenerator;
use bimcp::ifc::{IfcModel, SchemaId, SpfValue};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub mod oracles;

pub fn fixture_dir() -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

/// Small random building: project, site, building, storeys and walls with
/// placement geometry, all wired through aggregation and containment.
pub struct Gen {
    pub rng: ChaCha8Rng,
    pub guids: GuidGenerator,
}

impl Gen {
    pub fn new(seed: u64) -> Self {
        use rand::SeedableRng;
        let mut bytes = [0u8; 32];
        bytes[..8].copy_from_slice(&seed.to_le_bytes());
        Self { rng: ChaCha8Rng::seed_from_u64(seed), guids: GuidGenerator::seeded(bytes) }
    }

    pub fn gid(&mut self) -> SpfValue {
        SpfValue::string(self.guids.next_guid())
    }

    pub fn placement(&mut self, m: &mut IfcModel, x: f64, y: f64) -> u64 {
        let p = m.add("IFCCARTESIANPOINT", vec![SpfValue::reals([x, y, 0.0])]);
        let a = m.add("IFCAXIS2PLACEMENT3D", vec![SpfValue::Ref(p), SpfValue::Unset, SpfValue::Unset]);
        m.add("IFCLOCALPLACEMENT", vec![SpfValue::Unset, SpfValue::Ref(a)])
    }

    pub fn rel_aggregates(&mut self, m: &mut IfcModel, parent: u64, children: Vec<u64>) -> u64 {
        let g = self.gid();
        m.add(
            "IFCRELAGGREGATES",
            vec![g, SpfValue::Unset, SpfValue::Unset, SpfValue::Unset, SpfValue::Ref(parent), SpfValue::refs(children)],
        )
    }

    pub fn wall(&mut self, m: &mut IfcModel, name: &str) -> u64 {
        let x = self.rng.gen_range(0..20) as f64;
        let y = self.rng.gen_range(0..20) as f64;
        self.wall_at(m, name, x, y)
    }

    pub fn wall_at(&mut self, m: &mut IfcModel, name: &str, x: f64, y: f64) -> u64 {
        let pl = self.placement(m, x, y);
        let g = self.gid();
        m.add(
            "IFCWALL",
            vec![
                g,
                SpfValue::Unset,
                SpfValue::string(name),
                SpfValue::Unset,
                SpfValue::Unset,
                SpfValue::Ref(pl),
                SpfValue::Unset,
                SpfValue::Unset,
                SpfValue::enumeration("STANDARD"),
            ],
        )
    }

    pub fn contain(&mut self, m: &mut IfcModel, storey: u64, elems: Vec<u64>) -> u64 {
        let g = self.gid();
        m.add(
            "IFCRELCONTAINEDINSPATIALSTRUCTURE",
            vec![g, SpfValue::Unset, SpfValue::Unset, SpfValue::Unset, SpfValue::refs(elems), SpfValue::Ref(storey)],
        )
    }

    pub fn model(&mut self) -> IfcModel {
        let mut m = IfcModel::new(SchemaId::Ifc4);
        let g = self.gid();
        let project = m.add(
            "IFCPROJECT",
            vec![
                g,
                SpfValue::Unset,
                SpfValue::string("P"),
                SpfValue::Unset,
                SpfValue::Unset,
                SpfValue::Unset,
                SpfValue::Unset,
                SpfValue::Unset,
                SpfValue::Unset,
            ],
        );
        let pl = self.placement(&mut m, 0.0, 0.0);
        let g = self.gid();
        let mut site_attrs = vec![
            g,
            SpfValue::Unset,
            SpfValue::string("S"),
            SpfValue::Unset,
            SpfValue::Unset,
            SpfValue::Ref(pl),
            SpfValue::Unset,
            SpfValue::Unset,
            SpfValue::enumeration("ELEMENT"),
        ];
        site_attrs.extend(std::iter::repeat_n(SpfValue::Unset, 5));
        let site = m.add("IFCSITE", site_attrs);
        let g = self.gid();
        let mut b_attrs = vec![
            g,
            SpfValue::Unset,
            SpfValue::string("B"),
            SpfValue::Unset,
            SpfValue::Unset,
            SpfValue::Ref(pl),
            SpfValue::Unset,
            SpfValue::Unset,
            SpfValue::enumeration("ELEMENT"),
        ];
        b_attrs.extend(std::iter::repeat_n(SpfValue::Unset, 3));
        let building = m.add("IFCBUILDING", b_attrs);
        self.rel_aggregates(&mut m, project, vec![site]);
        self.rel_aggregates(&mut m, site, vec![building]);
        let n_storeys = self.rng.gen_range(1..=3);
        let mut storeys = Vec::new();
        for s in 0..n_storeys {
            let g = self.gid();
            let storey = m.add(
                "IFCBUILDINGSTOREY",
                vec![
                    g,
                    SpfValue::Unset,
                    SpfValue::string(format!("Level {s}")),
                    SpfValue::Unset,
                    SpfValue::Unset,
                    SpfValue::Ref(pl),
                    SpfValue::Unset,
                    SpfValue::Unset,
                    SpfValue::enumeration("ELEMENT"),
                    SpfValue::Real(3.0 * s as f64),
                ],
            );
            storeys.push(storey);
            let n_walls = self.rng.gen_range(0..5);
            let walls: Vec<u64> = (0..n_walls).map(|i| self.wall(&mut m, &format!("W{s}-{i}"))).collect();
            if !walls.is_empty() {
                self.contain(&mut m, storey, walls);
            }
        }
        self.rel_aggregates(&mut m, building, storeys);
        m
    }

    pub fn pick_wall(&mut self, m: &IfcModel) -> Option<u64> {
        let walls: Vec<u64> = m.of_type("IfcWall").map(|e| e.id).collect();
        walls.choose(&mut self.rng).copied()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Edit {
    Rename,
    Move,
    AddWall,
    DeleteWall,
    DuplicatePoint,
}

pub const EDITS: [Edit; 5] = [Edit::Rename, Edit::Move, Edit::AddWall, Edit::DeleteWall, Edit::DuplicatePoint];

/// Applies one edit and returns the GlobalIds it touched.
///
/// `target` names the wall (by GlobalId) for wall edits; a random wall is
/// picked when it is `None`.
pub fn apply(gen: &mut Gen, m: &mut IfcModel, edit: Edit, target: Option<&str>) -> Vec<String> {
    let target = match target {
        Some(g) => m.by_global_id(g).map(|e| e.id),
        None => gen.pick_wall(m),
    };
    match edit {
        Edit::Rename => {
            let Some(w) = target else { return vec![] };
            let name = format!("renamed {}", gen.rng.gen::<u32>());
            let e = m.get_mut(w).unwrap();
            e.attrs[2] = SpfValue::string(name);
            vec![e.global_id().unwrap().to_string()]
        }
        Edit::Move => {
            let Some(w) = target else { return vec![] };
            let x = 100.0 + gen.rng.gen_range(0..4000) as f64;
            let pl = gen.placement(m, x, 1.5);
            let e = m.get_mut(w).unwrap();
            let old = e.attrs[5].as_ref_id().unwrap();
            e.attrs[5] = SpfValue::Ref(pl);
            let gid = e.global_id().unwrap().to_string();
            remove_subtree(m, old);
            vec![gid]
        }
        Edit::AddWall => {
            let storey = m.of_type("IfcBuildingStorey").map(|e| e.id).next().unwrap();
            let x = 5000.0 + gen.rng.gen::<u32>() as f64;
            let w = gen.wall_at(m, "added", x, 0.0);
            let rel = gen.contain(m, storey, vec![w]);
            vec![m.get(w).unwrap().global_id().unwrap().into(), m.get(rel).unwrap().global_id().unwrap().into()]
        }
        Edit::DeleteWall => {
            let Some(w) = target else { return vec![] };
            let mut touched = vec![m.get(w).unwrap().global_id().unwrap().to_string()];
            let rels: Vec<u64> = m.of_type("IfcRelContainedInSpatialStructure").map(|e| e.id).collect();
            for rel in rels {
                let e = m.get_mut(rel).unwrap();
                if e.attrs[4].remove_ref_from_lists(w) {
                    touched.push(e.global_id().unwrap().to_string());
                    if e.attrs[4].as_list().unwrap().is_empty() {
                        m.remove(rel);
                    }
                }
            }
            let pl = m.get(w).unwrap().attrs[5].as_ref_id().unwrap();
            m.remove(w);
            remove_subtree(m, pl);
            touched
        }
        Edit::DuplicatePoint => {
            m.add("IFCCARTESIANPOINT", vec![SpfValue::reals([0.0, 0.0, 0.0])]);
            vec![]
        }
    }
}

/// Removes an unrooted subtree that nothing else references.
pub fn remove_subtree(m: &mut IfcModel, root: u64) {
    let mut stack = vec![root];
    while let Some(id) = stack.pop() {
        let referenced = m.iter().any(|e| e.id != id && e.refs().any(|r| r == id));
        if referenced {
            continue;
        }
        if let Some(e) = m.remove(id) {
            stack.extend(e.refs());
        }
    }
}
