//! Run a selector against a model file.
//!
//! cargo run --example select_query -- "IfcWall, Name=North Wall" [model.ifc]

use bimcp::exec::contract::SEED_MODEL;
use bimcp::ifc;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let selector = args.next().unwrap_or_else(|| "IfcWall".into());
    let text = match args.next() {
        Some(path) => std::fs::read_to_string(path)?,
        None => SEED_MODEL.to_string(),
    };
    let model = ifc::parse(&text)?;
    let hits = ifc::select(&model, &selector)?;
    println!("{} match(es) for {selector:?}", hits.len());
    for e in hits {
        println!("#{} {} {:?} {}", e.id, e.type_name, e.name().unwrap_or("-"), e.global_id().unwrap_or("-"));
    }
    Ok(())
}
