use super::binary::{product, Reader, Writer};
use crate::error::Result;
use crate::model::{GaussianFrame, ViewMaps};

pub const FRAME_MAGIC: &[u8; 4] = b"G4DA";
const FRAME_KIND: u32 = 1;
/// Float planes per view: P(3) O(1) C(3) Q(4) S(3).
const PLANES: usize = 14;

/// Header, then `width`, `height`, `views` (`u32`) and `timestamp` (`i64`),
/// then per view the planar float maps P, O, C, Q, S and the bit-packed
/// valid mask.
pub fn frame_to_bytes(frame: &GaussianFrame) -> Vec<u8> {
    let mut w = Writer::new(FRAME_MAGIC, FRAME_KIND);
    w.u32(frame.width() as u32);
    w.u32(frame.height() as u32);
    w.u32(frame.view_count() as u32);
    w.i64(frame.timestamp());
    for v in frame.views() {
        w.planes(&v.positions);
        w.planes(&v.opacities.iter().map(|o| [*o]).collect::<Vec<_>>());
        w.planes(&v.colors);
        w.planes(&v.rotations);
        w.planes(&v.scales);
        w.bits(&v.valid);
    }
    w.finish()
}

pub fn frame_from_bytes(data: &[u8]) -> Result<GaussianFrame> {
    let (mut r, kind) = Reader::open(data, FRAME_MAGIC)?;
    super::expect_kind(kind, FRAME_KIND)?;
    let width = r.u32()? as usize;
    let height = r.u32()? as usize;
    let views = r.u32()? as usize;
    let timestamp = r.i64()?;
    let pixels = product(&[width, height]);
    let per_view = pixels.and_then(|n| product(&[n, PLANES, 4])?.checked_add(n.div_ceil(8)));
    r.expect_payload(per_view.and_then(|v| product(&[v, views])))?;
    let n = pixels.unwrap_or(0);
    let mut maps = Vec::with_capacity(views);
    for _ in 0..views {
        let positions = r.planes::<3>(n)?;
        let opacities = r.f32s(n)?;
        let colors = r.planes::<3>(n)?;
        let rotations = r.planes::<4>(n)?;
        let scales = r.planes::<3>(n)?;
        let valid = r.bits(n)?;
        maps.push(ViewMaps {
            positions,
            opacities,
            colors,
            rotations,
            scales,
            valid,
        });
    }
    GaussianFrame::new(width, height, timestamp, maps)
}

pub fn write_frame(path: impl AsRef<std::path::Path>, frame: &GaussianFrame) -> Result<()> {
    Ok(std::fs::write(path, frame_to_bytes(frame))?)
}

pub fn read_frame(path: impl AsRef<std::path::Path>) -> Result<GaussianFrame> {
    frame_from_bytes(&std::fs::read(path)?)
}
