use super::binary::{product, Reader, Writer};
use crate::error::{Error, Result};
use crate::metrics::TriangleMesh;

pub const MESH_MAGIC: &[u8; 4] = b"G4DM";
const MESH_KIND: u32 = 1;

/// Header, vertex and face counts (`u32`), `f64` xyz per vertex, `u32`
/// vertex triples per face, then one `u32` correspondence id per vertex.
pub fn mesh_to_bytes(mesh: &TriangleMesh) -> Vec<u8> {
    let mut w = Writer::new(MESH_MAGIC, MESH_KIND);
    w.u32(mesh.vertices().len() as u32);
    w.u32(mesh.faces().len() as u32);
    for v in mesh.vertices().iter().flatten() {
        w.f64(*v);
    }
    for i in mesh.faces().iter().flatten() {
        w.u32(*i);
    }
    for i in mesh.ids() {
        w.u32(*i);
    }
    w.finish()
}

pub fn mesh_from_bytes(data: &[u8]) -> Result<TriangleMesh> {
    let (mut r, kind) = Reader::open(data, MESH_MAGIC)?;
    super::expect_kind(kind, MESH_KIND)?;
    let nv = r.u32()? as usize;
    let nf = r.u32()? as usize;
    let expected = product(&[nv, 24])
        .zip(product(&[nf, 12]))
        .zip(product(&[nv, 4]))
        .and_then(|((a, b), c)| a.checked_add(b)?.checked_add(c));
    r.expect_payload(expected)?;
    let v = r.f64s(nv * 3)?;
    let f = r.u32s(nf * 3)?;
    let ids = r.u32s(nv)?;
    if v.iter().any(|c| !c.is_finite()) {
        return Err(Error::NonFiniteValue("mesh vertices".into()));
    }
    TriangleMesh::new(
        v.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect(),
        f.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect(),
        ids,
    )
}

pub fn write_mesh(path: impl AsRef<std::path::Path>, mesh: &TriangleMesh) -> Result<()> {
    Ok(std::fs::write(path, mesh_to_bytes(mesh))?)
}

pub fn read_mesh(path: impl AsRef<std::path::Path>) -> Result<TriangleMesh> {
    mesh_from_bytes(&std::fs::read(path)?)
}
