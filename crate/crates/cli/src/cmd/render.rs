use crate::failure::{usage, Outcome};
use crate::report::Report;
use crate::{RenderArgs, RendererArg};
use anyhow::Context;
use g4d_core::render::RendererKind;
use g4d_core::{io, Camera, RenderConfig, Renderer};
use std::path::Path;

pub fn parse_color(s: &str) -> Outcome<[f32; 3]> {
    let parts: Vec<f32> = s
        .split(',')
        .map(|p| p.trim().parse::<f32>())
        .collect::<Result<_, _>>()
        .map_err(|_| usage(format!("--bg must be r,g,b, got {s:?}")))?;
    match parts[..] {
        [r, g, b] if parts.iter().all(|c| c.is_finite()) => Ok([r, g, b]),
        _ => Err(usage(format!("--bg must be three finite numbers, got {s:?}"))),
    }
}

pub fn parse_size(s: &str) -> Outcome<(usize, usize)> {
    let bad = || usage(format!("--size must be WxH, got {s:?}"));
    let (w, h) = s.split_once(['x', 'X']).ok_or_else(bad)?;
    let w: usize = w.trim().parse().map_err(|_| bad())?;
    let h: usize = h.trim().parse().map_err(|_| bad())?;
    if w == 0 || h == 0 {
        return Err(bad());
    }
    Ok((w, h))
}

/// The raster whose center is the principal point.
fn implied_size(cam: &Camera) -> (usize, usize) {
    let k = cam.intrinsics();
    let side = |c: f64| ((2.0 * c + 1.0).round().max(1.0)) as usize;
    (side(k.cx), side(k.cy))
}

fn is_png(p: &Path) -> bool {
    p.extension().is_some_and(|e| e.eq_ignore_ascii_case("png"))
}

pub fn run(args: &RenderArgs, report: &mut Report) -> Outcome {
    let bg = parse_color(&args.bg)?;
    let size = args.size.as_deref().map(parse_size).transpose()?;
    let frame = io::read_frame(&args.frame).with_context(|| format!("reading {}", args.frame.display()))?;
    let sets = io::read_cameras(&args.cameras).with_context(|| format!("reading {}", args.cameras.display()))?;
    let t = match args.t {
        Some(t) => t,
        None => usize::try_from(frame.timestamp()).unwrap_or(0).min(sets.len().saturating_sub(1)),
    };
    let set = sets
        .get(t)
        .ok_or_else(|| usage(format!("camera set {t} not in file (has {})", sets.len())))?;
    let cam = set
        .get(args.view)
        .ok_or_else(|| usage(format!("view {} not in camera set (has {})", args.view, set.len())))?;
    let (w, h) = size.unwrap_or_else(|| implied_size(cam));
    let config = RenderConfig::new(w, h).with_background(bg);
    let kind = match args.renderer {
        RendererArg::Tiled => RendererKind::Tiled,
        RendererArg::Reference => RendererKind::Reference,
    };
    let cloud = frame.flatten();
    let img = kind.render(&cloud, cam, &config)?;
    if is_png(&args.out) {
        io::write_png(&args.out, &img)?;
    } else {
        io::write_image(&args.out, &img)?;
    }
    report.set("out", args.out.display().to_string());
    report.set("width", w);
    report.set("height", h);
    report.set("view", args.view);
    report.set("camera_set", t);
    report.set("gaussians", cloud.len());
    report.set("renderer", format!("{:?}", kind).to_lowercase());
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn colors_and_sizes() {
        assert_eq!(parse_color("0.1, 0.2,1").unwrap(), [0.1, 0.2, 1.0]);
        assert!(parse_color("1,2").is_err());
        assert!(parse_color("a,b,c").is_err());
        assert!(parse_color("1,nan,0").is_err());
        assert_eq!(parse_size("64x48").unwrap(), (64, 48));
        assert!(parse_size("0x4").is_err());
        assert!(parse_size("64").is_err());
    }
}
