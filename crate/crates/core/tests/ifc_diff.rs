mod common;

use bimcp::ifc::{entity_diff, spf, SpfValue};
use bimcp::schemas::{ChangeKind, DiffRaw};
use common::oracles::assert_matches_oracle;
use common::{apply, Edit, Gen, EDITS};
use proptest::prelude::*;
use rand::Rng;

#[test]
fn random_scenarios_match_naive_oracle() {
    for seed in 0..250u64 {
        let mut g = Gen::new(seed);
        let base = g.model();
        let mut edited = base.clone();
        let n = g.rng.gen_range(1..=4);
        for _ in 0..n {
            let edit = EDITS[g.rng.gen_range(0..EDITS.len())];
            apply(&mut g, &mut edited, edit, None);
        }
        assert_matches_oracle(&base, &edited);
        // Re-serialising renumbers nothing but exercises the parsed path too.
        let reparsed = spf::parse(&spf::serialize(&edited)).unwrap();
        assert!(entity_diff(&edited, &reparsed).is_empty());
    }
}

#[test]
fn rename_reports_name_attribute() {
    let mut g = Gen::new(7);
    let mut base = g.model();
    while base.of_type("IfcWall").next().is_none() {
        base = g.model();
    }
    let mut edited = base.clone();
    let w = base.of_type("IfcWall").next().unwrap();
    let gid = w.global_id().unwrap().to_string();
    edited.get_mut(w.id).unwrap().attrs[2] = SpfValue::string("B");
    let d = assert_matches_oracle(&base, &edited);
    assert_eq!(d.entries.len(), 1);
    assert_eq!(d.entries[0].entity_key, gid);
    let c = &d.entries[0].changed_attributes[0];
    assert_eq!((c.attr_index, c.attr_name.as_str(), c.after.as_str()), (2, "Name", "'B'"));
}

#[test]
fn large_fixture_self_diff_is_empty() {
    let text = std::fs::read_to_string(common::fixture_dir().join("third_party/Pset_IFC4_ADD2.ifc")).unwrap();
    let m = spf::parse(&text).unwrap();
    let started = std::time::Instant::now();
    assert!(entity_diff(&m, &m).is_empty());
    assert!(started.elapsed().as_secs() < 20);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn diff_is_antisymmetric(seed in any::<u64>(), edits in prop::collection::vec(0..EDITS.len(), 1..5)) {
        let mut g = Gen::new(seed);
        let a = g.model();
        let mut b = a.clone();
        for e in edits {
            apply(&mut g, &mut b, EDITS[e], None);
        }
        let ab = entity_diff(&a, &b);
        let ba = entity_diff(&b, &a);
        let keys = |d: &DiffRaw, k: ChangeKind| -> Vec<String> {
            let mut v: Vec<String> = d.entries.iter().filter(|e| e.change_kind == k).map(|e| e.entity_key.clone()).collect();
            v.sort();
            v
        };
        prop_assert_eq!(keys(&ab, ChangeKind::Added), keys(&ba, ChangeKind::Removed));
        prop_assert_eq!(keys(&ab, ChangeKind::Removed), keys(&ba, ChangeKind::Added));
        prop_assert_eq!(keys(&ab, ChangeKind::Modified), keys(&ba, ChangeKind::Modified));
        for e in ab.entries.iter().filter(|e| e.change_kind == ChangeKind::Modified) {
            let r = ba.entries.iter().find(|x| x.entity_key == e.entity_key).unwrap();
            prop_assert_eq!(e.changed_attributes.len(), r.changed_attributes.len());
            for (x, y) in e.changed_attributes.iter().zip(&r.changed_attributes) {
                prop_assert_eq!(x.attr_index, y.attr_index);
                prop_assert_eq!(&x.before, &y.after);
                prop_assert_eq!(&x.after, &y.before);
            }
        }
    }

    #[test]
    fn disjoint_edits_compose(seed in any::<u64>(), e1 in 0..EDITS.len(), e2 in 0..EDITS.len(), s1 in any::<u64>(), s2 in any::<u64>()) {
        let mut g = Gen::new(seed);
        let m = g.model();
        let walls: Vec<String> = m.of_type("IfcWall").map(|w| w.global_id().unwrap().to_string()).collect();
        prop_assume!(!walls.is_empty());
        let t1 = walls.first().cloned();
        let t2 = walls.last().cloned();

        let mut m1 = m.clone();
        let touched1 = apply(&mut Gen::new(s1), &mut m1, EDITS[e1], t1.as_deref());
        let mut m2 = m.clone();
        let touched2 = apply(&mut Gen::new(s2), &mut m2, EDITS[e2], t2.as_deref());
        prop_assume!(touched1.iter().all(|t| !touched2.contains(t)));

        let mut m12 = m.clone();
        apply(&mut Gen::new(s1), &mut m12, EDITS[e1], t1.as_deref());
        apply(&mut Gen::new(s2), &mut m12, EDITS[e2], t2.as_deref());

        prop_assert_eq!(
            entity_diff(&m, &m12).len(),
            entity_diff(&m, &m1).len() + entity_diff(&m, &m2).len()
        );
    }
}

#[test]
fn edit_kinds_are_all_exercised() {
    // Guards the generator: each edit must produce a non-empty diff on a model with walls.
    let mut g = Gen::new(99);
    let mut base = g.model();
    while base.of_type("IfcWall").count() < 2 {
        base = g.model();
    }
    for edit in EDITS {
        let mut m = base.clone();
        apply(&mut g, &mut m, edit, None);
        assert!(!entity_diff(&base, &m).is_empty(), "{edit:?}");
        if edit == Edit::DuplicatePoint {
            let d = entity_diff(&base, &m);
            assert!(d.entries[0].entity_key.contains(':'));
        }
    }
}
