use super::binary::{product, Reader, Writer};
use crate::error::{Error, Result};
use crate::model::{FlowField, MotionField, WeightMap};

pub const RASTER_MAGIC: &[u8; 4] = b"G4DR";

/// Any per-pixel field stored as a `G4DR` raster.
#[derive(Debug, Clone, PartialEq)]
pub enum Raster {
    Motion(MotionField),
    Flow(FlowField),
    Weights(WeightMap),
}

impl Raster {
    fn kind(&self) -> u32 {
        match self {
            Raster::Motion(_) => 1,
            Raster::Flow(_) => 2,
            Raster::Weights(_) => 3,
        }
    }

    pub fn into_motion(self) -> Result<MotionField> {
        match self {
            Raster::Motion(m) => Ok(m),
            _ => Err(Error::CorruptHeader("raster is not a motion field".into())),
        }
    }

    pub fn into_flow(self) -> Result<FlowField> {
        match self {
            Raster::Flow(f) => Ok(f),
            _ => Err(Error::CorruptHeader("raster is not a flow field".into())),
        }
    }

    pub fn into_weights(self) -> Result<WeightMap> {
        match self {
            Raster::Weights(w) => Ok(w),
            _ => Err(Error::CorruptHeader("raster is not a weight map".into())),
        }
    }
}

impl From<MotionField> for Raster {
    fn from(m: MotionField) -> Self {
        Raster::Motion(m)
    }
}

impl From<FlowField> for Raster {
    fn from(f: FlowField) -> Self {
        Raster::Flow(f)
    }
}

impl From<WeightMap> for Raster {
    fn from(w: WeightMap) -> Self {
        Raster::Weights(w)
    }
}

/// Header, `width` and `height` (`u32`), then by kind:
/// motion: `view` (`u32`), `timestamp` (`i64`), backward xyz and forward xyz
/// planes; flow: u and v planes plus the bit-packed valid mask; weights: one
/// plane.
pub fn raster_to_bytes(raster: &Raster) -> Vec<u8> {
    let mut w = Writer::new(RASTER_MAGIC, raster.kind());
    match raster {
        Raster::Motion(m) => {
            w.u32(m.width() as u32);
            w.u32(m.height() as u32);
            w.u32(m.view());
            w.i64(m.timestamp());
            w.planes(m.backward());
            w.planes(m.forward());
        }
        Raster::Flow(f) => {
            w.u32(f.width() as u32);
            w.u32(f.height() as u32);
            w.planes(f.flow());
            w.bits(f.valid());
        }
        Raster::Weights(m) => {
            w.u32(m.width() as u32);
            w.u32(m.height() as u32);
            for v in m.weights() {
                w.f32(*v);
            }
        }
    }
    w.finish()
}

pub fn raster_from_bytes(data: &[u8]) -> Result<Raster> {
    let (mut r, kind) = Reader::open(data, RASTER_MAGIC)?;
    if !(1..=3).contains(&kind) {
        return Err(Error::CorruptHeader(format!("unknown raster kind {kind}")));
    }
    let width = r.u32()? as usize;
    let height = r.u32()? as usize;
    let pixels = product(&[width, height]);
    match kind {
        1 => {
            let view = r.u32()?;
            let timestamp = r.i64()?;
            r.expect_payload(pixels.and_then(|n| product(&[n, 6, 4])))?;
            let n = pixels.unwrap_or(0);
            let backward = r.planes::<3>(n)?;
            let forward = r.planes::<3>(n)?;
            Ok(Raster::Motion(MotionField::new(
                width, height, view, timestamp, backward, forward,
            )?))
        }
        2 => {
            r.expect_payload(pixels.and_then(|n| product(&[n, 2, 4])?.checked_add(n.div_ceil(8))))?;
            let n = pixels.unwrap_or(0);
            let flow = r.planes::<2>(n)?;
            let valid = r.bits(n)?;
            Ok(Raster::Flow(FlowField::new(width, height, flow, valid)?))
        }
        _ => {
            r.expect_payload(pixels.and_then(|n| product(&[n, 4])))?;
            let weights = r.f32s(pixels.unwrap_or(0))?;
            Ok(Raster::Weights(WeightMap::new(width, height, weights)?))
        }
    }
}

pub fn write_raster(path: impl AsRef<std::path::Path>, raster: &Raster) -> Result<()> {
    Ok(std::fs::write(path, raster_to_bytes(raster))?)
}

pub fn read_raster(path: impl AsRef<std::path::Path>) -> Result<Raster> {
    raster_from_bytes(&std::fs::read(path)?)
}
