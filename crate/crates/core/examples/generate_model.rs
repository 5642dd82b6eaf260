//! Build a small house with the native adapter, no services involved.
//!
//! cargo run --example generate_model > house.ifc

use bimcp::exec::native::NativeAdapter;
use bimcp::exec::{Adapter, RunContext};
use bimcp::ifc::schema_check;
use serde_json::json;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let adapter = NativeAdapter;
    let mut model = adapter.empty_model();
    let steps = [
        ("create_project", json!({"name": "House", "siteName": "Plot 7", "buildingName": "Main"})),
        ("add_storey", json!({"name": "Ground", "elevation": 0.0})),
        (
            "create_wall",
            json!({"storeyRef": "Ground", "start": [0, 0], "end": [8, 0], "height": 3.0, "thickness": 0.2, "name": "South"}),
        ),
        (
            "create_wall",
            json!({"storeyRef": "Ground", "start": [8, 0], "end": [8, 6], "height": 3.0, "thickness": 0.2, "name": "East"}),
        ),
        (
            "create_wall",
            json!({"storeyRef": "Ground", "start": [8, 6], "end": [0, 6], "height": 3.0, "thickness": 0.2, "name": "North"}),
        ),
        (
            "create_wall",
            json!({"storeyRef": "Ground", "start": [0, 6], "end": [0, 0], "height": 3.0, "thickness": 0.2, "name": "West"}),
        ),
        ("add_door", json!({"wallRef": "South", "offsetAlongWall": 1.0, "width": 0.9, "height": 2.1})),
        ("add_window", json!({"wallRef": "North", "offset": 2.0, "width": 1.2, "height": 1.2, "sillHeight": 0.9})),
    ];
    let mut ctx = RunContext::for_request(true, b"", "generate_model", "example");
    for (tool, params) in steps {
        let out = adapter.run_high_level(tool, &params, &mut model, &mut ctx)?;
        eprintln!("{tool}: {}", out.unwrap_or_default());
    }
    let report = schema_check(&model);
    eprintln!("schema check passed: {}", report.passed);
    print!("{}", String::from_utf8(adapter.save_model(&model, &ctx))?);
    Ok(())
}
