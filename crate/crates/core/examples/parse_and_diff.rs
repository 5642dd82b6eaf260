//! Parse two STEP files and print the entity diff between them.
//!
//! cargo run --example parse_and_diff -- old.ifc new.ifc
//!
//! With no arguments the bundled seed model is compared with a copy whose
//! first wall has been renamed.

use bimcp::exec::contract::SEED_MODEL;
use bimcp::ifc::{self, SpfValue};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let (old, new) = match args.as_slice() {
        [a, b] => (ifc::parse(&std::fs::read_to_string(a)?)?, ifc::parse(&std::fs::read_to_string(b)?)?),
        _ => {
            let old = ifc::parse(SEED_MODEL)?;
            let mut new = old.clone();
            let wall = new.of_type("IfcWall").next().map(|e| e.id).ok_or("seed has no wall")?;
            *new.get_mut(wall).unwrap().attr_mut("Name").unwrap() = SpfValue::String("Renamed".into());
            (old, new)
        }
    };

    let diff = ifc::entity_diff(&old, &new);
    for e in &diff.entries {
        println!("{:?} {} {}", e.change_kind, e.entity_type, e.entity_key);
        for c in &e.changed_attributes {
            println!("    {}: {} -> {}", c.attr_name, c.before, c.after);
        }
    }
    let s = diff.summarize();
    println!("added {} removed {} modified {}", s.totals.added, s.totals.removed, s.totals.modified);
    Ok(())
}
