use crate::error::Result;
use crate::model::GaussianCloud;
use std::io::Write;

/// Vertex properties in file order, all `float`.
pub const PLY_PROPERTIES: [&str; 14] = [
    "x", "y", "z", "opacity", "red", "green", "blue", "rot_0", "rot_1", "rot_2", "rot_3",
    "scale_0", "scale_1", "scale_2",
];

/// Binary little-endian PLY with one vertex per Gaussian. Colors are linear
/// floats in `[0, 1]`, `rot_*` the `[w, x, y, z]` quaternion and `scale_*` the
/// per-axis standard deviations.
pub fn ply_to_bytes(cloud: &GaussianCloud) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(b"ply\nformat binary_little_endian 1.0\n");
    out.extend_from_slice(format!("element vertex {}\n", cloud.len()).as_bytes());
    for p in PLY_PROPERTIES {
        out.extend_from_slice(format!("property float {p}\n").as_bytes());
    }
    out.extend_from_slice(b"end_header\n");
    for (g, _) in cloud.iter() {
        let opacity = [g.opacity];
        let values = [&g.position[..], &opacity, &g.color, &g.rotation, &g.scale];
        for v in values.into_iter().flatten() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

pub fn export_ply(path: impl AsRef<std::path::Path>, cloud: &GaussianCloud) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    f.write_all(&ply_to_bytes(cloud))?;
    Ok(())
}
