//! The versioned store used directly as a library.

use bimcp::store::ObjectStore;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = tempfile::tempdir()?;
    let store = ObjectStore::open(dir.path())?;
    store.create_bucket("models")?;
    let v1 = store.put_object("models", "demo/a.ifc", b"first")?;
    let v2 = store.put_object("models", "demo/a.ifc", b"second")?;
    println!("v1 {} {}", v1.version_id, v1.content_hash);
    println!("v2 {} {}", v2.version_id, v2.content_hash);

    let (_, old) = store.get_object("models", "demo/a.ifc", Some(&v1.version_id))?;
    let (latest, _) = store.get_object("models", "demo/a.ifc", None)?;
    println!("v1 still reads {:?}; latest is {}", String::from_utf8_lossy(&old), latest.version_id);
    for v in store.list_versions("models", "demo/a.ifc")? {
        println!("  {} {} bytes", v.version_id, v.size);
    }
    Ok(())
}
