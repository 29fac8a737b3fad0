//! Camera sequences as TOML text:
//!
//! ```toml
//! format = "g4d-cameras"
//! version = 1
//!
//! [[timestamps]]
//!
//! [[timestamps.views]]
//! rotation = [1.0, 0.0, 0.0, 0.0]
//! translation = [0.0, 0.0, 0.0]
//! fx = 100.0
//! fy = 100.0
//! cx = 31.5
//! cy = 31.5
//! ```
//!
//! Floats are written in shortest round-trip form, so reading back is exact.

use super::binary::FORMAT_VERSION;
use crate::error::{Error, Result};
use crate::model::{Camera, CameraSet, Intrinsics};
use serde::Deserialize;
use std::fmt::Write as _;
use std::ops::Range;
use toml::Spanned;

const FORMAT_NAME: &str = "g4d-cameras";

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct FileDoc {
    format: Spanned<String>,
    version: Spanned<i64>,
    #[serde(default)]
    timestamps: Vec<TimestampDoc>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TimestampDoc {
    #[serde(default)]
    views: Vec<Spanned<ViewDoc>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ViewDoc {
    rotation: Spanned<Vec<f64>>,
    translation: Spanned<Vec<f64>>,
    fx: f64,
    fy: f64,
    cx: f64,
    cy: f64,
}

fn float(v: f64) -> String {
    format!("{v:?}")
}

fn list(v: &[f64]) -> String {
    let items: Vec<String> = v.iter().map(|x| float(*x)).collect();
    format!("[{}]", items.join(", "))
}

pub fn cameras_to_string(sets: &[CameraSet]) -> String {
    let mut s = format!("format = \"{FORMAT_NAME}\"\nversion = {FORMAT_VERSION}\n");
    for set in sets {
        s.push_str("\n[[timestamps]]\n");
        for cam in set {
            let k = cam.intrinsics();
            let _ = write!(
                s,
                "\n[[timestamps.views]]\nrotation = {}\ntranslation = {}\nfx = {}\nfy = {}\ncx = {}\ncy = {}\n",
                list(&cam.rotation()),
                list(&cam.translation()),
                float(k.fx),
                float(k.fy),
                float(k.cx),
                float(k.cy)
            );
        }
    }
    s
}

/// 1-based line and column of a byte offset.
pub(crate) fn locate(text: &str, offset: usize) -> (usize, usize) {
    let offset = offset.min(text.len());
    let before = &text[..offset];
    let line = before.matches('\n').count() + 1;
    let column = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    (line, column)
}

fn parse_error(text: &str, span: Option<Range<usize>>, message: impl Into<String>) -> Error {
    let (line, column) = span.map_or((1, 1), |s| locate(text, s.start));
    Error::Parse {
        line,
        column,
        message: message.into(),
    }
}

fn array<const N: usize>(text: &str, field: &Spanned<Vec<f64>>, name: &str) -> Result<[f64; N]> {
    <[f64; N]>::try_from(field.get_ref().as_slice()).map_err(|_| {
        parse_error(
            text,
            Some(field.span()),
            format!("{name} needs {N} numbers, found {}", field.get_ref().len()),
        )
    })
}

pub fn cameras_from_str(text: &str) -> Result<Vec<CameraSet>> {
    let doc: FileDoc =
        toml::from_str(text).map_err(|e| parse_error(text, e.span(), e.message()))?;
    if doc.format.get_ref() != FORMAT_NAME {
        return Err(parse_error(
            text,
            Some(doc.format.span()),
            format!("format must be {FORMAT_NAME:?}"),
        ));
    }
    if *doc.version.get_ref() != FORMAT_VERSION as i64 {
        let found = *doc.version.get_ref();
        return Err(Error::VersionUnsupported {
            found: u32::try_from(found).unwrap_or(u32::MAX),
            supported: FORMAT_VERSION,
        });
    }
    doc.timestamps
        .iter()
        .map(|ts| {
            ts.views
                .iter()
                .map(|view| {
                    let v = view.get_ref();
                    let rotation = array::<4>(text, &v.rotation, "rotation")?;
                    let translation = array::<3>(text, &v.translation, "translation")?;
                    let k = Intrinsics {
                        fx: v.fx,
                        fy: v.fy,
                        cx: v.cx,
                        cy: v.cy,
                    };
                    Camera::new(rotation, translation, k).map_err(|e| {
                        let span = match &e {
                            Error::InvalidCamera(m) if m.starts_with("rotation") => {
                                v.rotation.span()
                            }
                            _ => view.span(),
                        };
                        parse_error(text, Some(span), e.to_string())
                    })
                })
                .collect()
        })
        .collect()
}

pub fn write_cameras(path: impl AsRef<std::path::Path>, sets: &[CameraSet]) -> Result<()> {
    Ok(std::fs::write(path, cameras_to_string(sets))?)
}

pub fn read_cameras(path: impl AsRef<std::path::Path>) -> Result<Vec<CameraSet>> {
    let bytes = std::fs::read(path)?;
    let text = std::str::from_utf8(&bytes).map_err(|e| Error::Parse {
        line: 1,
        column: 1,
        message: format!("not UTF-8: {e}"),
    })?;
    cameras_from_str(text)
}
