use super::binary::{product, Reader, Writer};
use crate::error::{Error, Result};
use crate::model::Image;
use image::{DynamicImage, ImageFormat, RgbImage};

pub const IMAGE_MAGIC: &[u8; 4] = b"G4DI";
const IMAGE_KIND: u32 = 1;

/// Lossless float raster: header, `width`, `height`, then R, G, B planes.
pub fn image_to_bytes(img: &Image) -> Vec<u8> {
    let mut w = Writer::new(IMAGE_MAGIC, IMAGE_KIND);
    w.u32(img.width() as u32);
    w.u32(img.height() as u32);
    w.planes(img.data());
    w.finish()
}

pub fn image_from_bytes(data: &[u8]) -> Result<Image> {
    let (mut r, kind) = Reader::open(data, IMAGE_MAGIC)?;
    super::expect_kind(kind, IMAGE_KIND)?;
    let width = r.u32()? as usize;
    let height = r.u32()? as usize;
    let pixels = product(&[width, height]);
    r.expect_payload(pixels.and_then(|n| product(&[n, 3, 4])))?;
    Image::new(width, height, r.planes::<3>(pixels.unwrap_or(0))?)
}

pub fn write_image(path: impl AsRef<std::path::Path>, img: &Image) -> Result<()> {
    Ok(std::fs::write(path, image_to_bytes(img))?)
}

pub fn read_image(path: impl AsRef<std::path::Path>) -> Result<Image> {
    image_from_bytes(&std::fs::read(path)?)
}

fn quantize(v: f32) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// 8-bit RGB PNG; values are clamped to `[0, 1]`.
pub fn png_to_bytes(img: &Image) -> Result<Vec<u8>> {
    let raw: Vec<u8> = img.data().iter().flat_map(|p| p.map(quantize)).collect();
    let buf = RgbImage::from_raw(img.width() as u32, img.height() as u32, raw)
        .ok_or_else(|| Error::ShapeMismatch("image buffer".into()))?;
    let mut out = std::io::Cursor::new(Vec::new());
    buf.write_to(&mut out, ImageFormat::Png)
        .map_err(image_error)?;
    Ok(out.into_inner())
}

/// Reads 8-bit gray or RGB PNGs (alpha is dropped).
pub fn png_from_bytes(data: &[u8]) -> Result<Image> {
    let decoded =
        image::load_from_memory_with_format(data, ImageFormat::Png).map_err(image_error)?;
    let rgb = match decoded {
        DynamicImage::ImageLuma8(_)
        | DynamicImage::ImageLumaA8(_)
        | DynamicImage::ImageRgb8(_)
        | DynamicImage::ImageRgba8(_) => decoded.to_rgb8(),
        other => return Err(Error::UnsupportedBitDepth(format!("{:?}", other.color()))),
    };
    let (w, h) = (rgb.width() as usize, rgb.height() as usize);
    let data = rgb
        .pixels()
        .map(|p| p.0.map(|c| c as f32 / 255.0))
        .collect();
    Image::new(w, h, data)
}

pub fn write_png(path: impl AsRef<std::path::Path>, img: &Image) -> Result<()> {
    Ok(std::fs::write(path, png_to_bytes(img)?)?)
}

pub fn read_png(path: impl AsRef<std::path::Path>) -> Result<Image> {
    png_from_bytes(&std::fs::read(path)?)
}

fn image_error(e: image::ImageError) -> Error {
    match e {
        image::ImageError::IoError(e) => Error::Io(e),
        image::ImageError::Unsupported(u) => Error::UnsupportedBitDepth(u.to_string()),
        other => Error::CorruptHeader(other.to_string()),
    }
}
