//! Little-endian header and payload plumbing shared by the binary formats.
//!
//! Every file starts with a 16-byte header: 4 ASCII magic bytes, the format
//! version, a payload kind tag and the endianness marker, all `u32`.

use crate::error::{Error, Result};

pub const FORMAT_VERSION: u32 = 1;
/// Reads back as `0x0102_0304` only when the file is little-endian.
pub const ENDIAN_MARKER: u32 = 0x0102_0304;
pub const HEADER_LEN: usize = 16;

pub(crate) struct Writer {
    buf: Vec<u8>,
}

impl Writer {
    pub fn new(magic: &[u8; 4], kind: u32) -> Self {
        let mut w = Self { buf: Vec::new() };
        w.buf.extend_from_slice(magic);
        w.u32(FORMAT_VERSION);
        w.u32(kind);
        w.u32(ENDIAN_MARKER);
        w
    }

    pub fn u32(&mut self, v: u32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn i64(&mut self, v: i64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn f32(&mut self, v: f32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn f64(&mut self, v: f64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn bytes(&mut self, b: &[u8]) {
        self.buf.extend_from_slice(b);
    }

    /// Planes of a multi-channel raster, channel after channel.
    pub fn planes<const N: usize>(&mut self, data: &[[f32; N]]) {
        for k in 0..N {
            for px in data {
                self.f32(px[k]);
            }
        }
    }

    /// LSB-first bit packing.
    pub fn bits(&mut self, mask: &[bool]) {
        for chunk in mask.chunks(8) {
            let byte = chunk
                .iter()
                .enumerate()
                .fold(0u8, |b, (i, &v)| b | ((v as u8) << i));
            self.buf.push(byte);
        }
    }

    pub fn finish(self) -> Vec<u8> {
        self.buf
    }
}

pub(crate) struct Reader<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    /// Checks magic, version and endianness; returns the kind tag.
    pub fn open(data: &'a [u8], magic: &[u8; 4]) -> Result<(Self, u32)> {
        if data.len() < 4 || &data[..4] != magic {
            return Err(Error::CorruptHeader(format!(
                "expected magic {:?}",
                String::from_utf8_lossy(magic)
            )));
        }
        let mut r = Self { data, pos: 4 };
        let version = r.u32()?;
        if version != FORMAT_VERSION {
            return Err(Error::VersionUnsupported {
                found: version,
                supported: FORMAT_VERSION,
            });
        }
        let kind = r.u32()?;
        let marker = r.u32()?;
        if marker != ENDIAN_MARKER {
            return Err(Error::CorruptHeader(format!(
                "endianness marker {marker:#010x}"
            )));
        }
        Ok((r, kind))
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.data.len())
            .ok_or(Error::TruncatedPayload {
                expected: self.pos.saturating_add(n),
                found: self.data.len(),
            })?;
        let s = &self.data[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    pub fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    pub fn i64(&mut self) -> Result<i64> {
        Ok(i64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub fn bytes(&mut self, n: usize) -> Result<&'a [u8]> {
        self.take(n)
    }

    pub fn f32s(&mut self, n: usize) -> Result<Vec<f32>> {
        let bytes = self.take(
            n.checked_mul(4)
                .ok_or_else(|| Error::CorruptHeader("size overflow".into()))?,
        )?;
        Ok(bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }

    pub fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let bytes = self.take(
            n.checked_mul(8)
                .ok_or_else(|| Error::CorruptHeader("size overflow".into()))?,
        )?;
        Ok(bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }

    pub fn u32s(&mut self, n: usize) -> Result<Vec<u32>> {
        let bytes = self.take(
            n.checked_mul(4)
                .ok_or_else(|| Error::CorruptHeader("size overflow".into()))?,
        )?;
        Ok(bytes
            .chunks_exact(4)
            .map(|c| u32::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }

    pub fn planes<const N: usize>(&mut self, pixels: usize) -> Result<Vec<[f32; N]>> {
        let flat = self.f32s(
            pixels
                .checked_mul(N)
                .ok_or_else(|| Error::CorruptHeader("size overflow".into()))?,
        )?;
        Ok((0..pixels)
            .map(|p| std::array::from_fn(|k| flat[k * pixels + p]))
            .collect())
    }

    pub fn bits(&mut self, n: usize) -> Result<Vec<bool>> {
        let bytes = self.take(n.div_ceil(8))?;
        Ok((0..n).map(|i| bytes[i / 8] >> (i % 8) & 1 == 1).collect())
    }

    pub fn remaining(&self) -> usize {
        self.data.len() - self.pos
    }

    /// Fails unless exactly `expected` payload bytes remain.
    pub fn expect_payload(&self, expected: Option<usize>) -> Result<()> {
        let expected = expected.ok_or_else(|| Error::CorruptHeader("shape overflows".into()))?;
        if self.remaining() != expected {
            return Err(Error::TruncatedPayload {
                expected: self.pos.saturating_add(expected),
                found: self.data.len(),
            });
        }
        Ok(())
    }
}

/// `a * b * ...` without overflow.
pub(crate) fn product(factors: &[usize]) -> Option<usize> {
    factors
        .iter()
        .try_fold(1usize, |acc, &f| acc.checked_mul(f))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bits_round_trip() {
        let mask: Vec<bool> = (0..19).map(|i| i % 3 == 0).collect();
        let mut w = Writer::new(b"TEST", 0);
        w.bits(&mask);
        let data = w.finish();
        let (mut r, kind) = Reader::open(&data, b"TEST").unwrap();
        assert_eq!(kind, 0);
        assert_eq!(r.bits(19).unwrap(), mask);
        assert_eq!(r.remaining(), 0);
    }

    #[test]
    fn header_errors() {
        let data = Writer::new(b"TEST", 2).finish();
        assert!(matches!(
            Reader::open(&data, b"NOPE"),
            Err(Error::CorruptHeader(_))
        ));
        let mut v = data.clone();
        v[4] = 9;
        assert!(matches!(
            Reader::open(&v, b"TEST"),
            Err(Error::VersionUnsupported { found: 9, .. })
        ));
        let mut v = data.clone();
        v[12..16].copy_from_slice(&ENDIAN_MARKER.to_be_bytes());
        assert!(matches!(
            Reader::open(&v, b"TEST"),
            Err(Error::CorruptHeader(_))
        ));
        assert!(matches!(
            Reader::open(&data[..10], b"TEST"),
            Err(Error::TruncatedPayload { .. })
        ));
    }
}
