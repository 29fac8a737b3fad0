use super::binary::{product, Reader, Writer};
use crate::error::{Error, Result};
use crate::fusion::{Activation, FusionMlp, MLP_INPUTS, MLP_LAYOUT, MLP_OUTPUTS};

pub const WEIGHTS_MAGIC: &[u8; 4] = b"F4DW";
const WEIGHTS_KIND: u32 = 1;
const MAX_LAYOUT_LEN: usize = 4096;

/// Header, activation code, hidden width, input and output widths (`u32`),
/// the layout string (`u32` length + UTF-8), then W1 (row-major
/// hidden × inputs), b1, W2 (outputs × hidden) and b2 as `f32`.
pub fn weights_to_bytes(mlp: &FusionMlp) -> Vec<u8> {
    let mut w = Writer::new(WEIGHTS_MAGIC, WEIGHTS_KIND);
    w.u32(mlp.activation().code());
    w.u32(mlp.hidden() as u32);
    w.u32(MLP_INPUTS as u32);
    w.u32(MLP_OUTPUTS as u32);
    w.u32(MLP_LAYOUT.len() as u32);
    w.bytes(MLP_LAYOUT.as_bytes());
    for v in [mlp.w1(), mlp.b1(), mlp.w2(), mlp.b2()]
        .into_iter()
        .flatten()
    {
        w.f32(*v);
    }
    w.finish()
}

pub fn weights_from_bytes(data: &[u8]) -> Result<FusionMlp> {
    let (mut r, kind) = Reader::open(data, WEIGHTS_MAGIC)?;
    super::expect_kind(kind, WEIGHTS_KIND)?;
    let code = r.u32()?;
    let activation = Activation::from_code(code)
        .ok_or_else(|| Error::WeightFileMismatch(format!("unknown activation {code}")))?;
    let hidden = r.u32()? as usize;
    let (inputs, outputs) = (r.u32()? as usize, r.u32()? as usize);
    if inputs != MLP_INPUTS || outputs != MLP_OUTPUTS {
        return Err(Error::WeightFileMismatch(format!(
            "{inputs} -> {outputs}, expected {MLP_INPUTS} -> {MLP_OUTPUTS}"
        )));
    }
    let len = r.u32()? as usize;
    if len > MAX_LAYOUT_LEN {
        return Err(Error::CorruptHeader(format!(
            "layout string of {len} bytes"
        )));
    }
    let layout = r.bytes(len)?;
    if layout != MLP_LAYOUT.as_bytes() {
        return Err(Error::WeightFileMismatch(format!(
            "layout {:?}, expected {MLP_LAYOUT:?}",
            String::from_utf8_lossy(layout)
        )));
    }
    let counts = [
        product(&[hidden, inputs]),
        Some(hidden),
        product(&[outputs, hidden]),
        Some(outputs),
    ];
    let total = counts.iter().try_fold(0usize, |a, c| a.checked_add((*c)?));
    r.expect_payload(total.and_then(|t| t.checked_mul(4)))?;
    let w1 = r.f32s(hidden * inputs)?;
    let b1 = r.f32s(hidden)?;
    let w2 = r.f32s(outputs * hidden)?;
    let b2 = r.f32s(outputs)?;
    FusionMlp::new(activation, hidden, w1, b1, w2, b2)
}

pub fn write_weights(path: impl AsRef<std::path::Path>, mlp: &FusionMlp) -> Result<()> {
    Ok(std::fs::write(path, weights_to_bytes(mlp))?)
}

pub fn read_weights(path: impl AsRef<std::path::Path>) -> Result<FusionMlp> {
    weights_from_bytes(&std::fs::read(path)?)
}
