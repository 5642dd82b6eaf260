//! Structural validation of a STEP file.
//!
//! cargo run --example schema_check -- model.ifc

use bimcp::ifc::{self, schema_check};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let path = std::env::args().nth(1).ok_or("usage: schema_check <model.ifc>")?;
    let model = ifc::parse(&std::fs::read_to_string(&path)?)?;
    let report = schema_check(&model);
    println!("{path}: {} entities, schema {}", model.len(), model.schema().as_str());
    for v in &report.violations {
        match v.entity {
            Some(id) => println!("  #{id} {:?}: {}", v.kind, v.message),
            None => println!("  {:?}: {}", v.kind, v.message),
        }
    }
    println!("{}", if report.passed { "passed" } else { "failed" });
    std::process::exit(if report.passed { 0 } else { 1 });
}
