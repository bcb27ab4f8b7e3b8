//! Regenerates the checked-in case meshes under `meshes/`.

use std::path::Path;

use galerkin_gcn::mesh::generate::{notched_plate, stenosis};
use galerkin_gcn::mesh::io::write_mesh;

fn main() -> galerkin_gcn::Result<()> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("meshes");
    std::fs::create_dir_all(&dir)?;
    write_mesh(&notched_plate()?, &dir.join("notch.mesh"))?;
    write_mesh(&stenosis(10, 2)?, &dir.join("stenosis.mesh"))?;
    Ok(())
}
