use crate::dataset::MANIFEST_FILE;
use crate::failure::{usage, Outcome};
use crate::report::Report;
use crate::SynthArgs;
use anyhow::Context;
use g4d_core::io::{self, Raster, SceneManifest, TimestampEntry};
use g4d_core::render::RendererKind;
use g4d_core::synth::{bake_gaussians, generate_scene, gt_flow, render_gt_views, BakeParams, SceneConfig};
use g4d_core::{Direction, RenderConfig};
use std::path::Path;

fn load_config(path: Option<&Path>) -> Outcome<SceneConfig> {
    let Some(p) = path else {
        return Ok(SceneConfig::default());
    };
    let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
    Ok(SceneConfig::from_toml(&text).with_context(|| format!("parsing {}", p.display()))?)
}

pub fn run(args: &SynthArgs, report: &mut Report) -> Outcome {
    let config = load_config(args.config.as_deref())?;
    let mut bake = BakeParams::default();
    if let Some(d) = args.density {
        if !(d > 0.0 && d.is_finite()) {
            return Err(usage(format!("--density must be positive, got {d}")));
        }
        bake.density = d;
    }
    let scene = generate_scene(&config, args.seed)?;
    let out = &args.out;
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;

    let mut manifest = SceneManifest::new(args.seed, config.clone(), bake);
    let n = scene.timestamps();
    io::write_cameras(out.join(&manifest.cameras), &vec![scene.cameras().to_vec(); n])?;
    io::write_cameras(out.join(&manifest.metric_cameras), &vec![scene.metric_cameras(); n])?;

    let rcfg = RenderConfig::new(scene.width(), scene.height());
    let mut gaussians = 0;
    let mut raster = 0;
    for t in 0..n {
        let dir = format!("t{t:03}");
        std::fs::create_dir_all(out.join(&dir))?;
        let rel = |name: String| format!("{dir}/{name}");
        let mut e = TimestampEntry {
            index: t,
            frame: rel("frame.g4da".into()),
            mesh: rel("mesh.g4dm".into()),
            metric_mesh: rel("mesh_metric.g4dm".into()),
            ..Default::default()
        };
        let baked = bake_gaussians(&scene, t, &bake)?;
        raster = baked.width();
        gaussians += baked.frame.valid_count();
        io::write_frame(out.join(&e.frame), &baked.frame)?;
        io::write_mesh(out.join(&e.mesh), scene.mesh(t))?;
        io::write_mesh(out.join(&e.metric_mesh), &scene.metric_mesh(t))?;
        for m in &baked.motions {
            let name = rel(format!("motion_v{}.g4dr", m.view()));
            io::write_raster(out.join(&name), &Raster::Motion(m.clone()))?;
            e.motions.push(name);
        }
        for (dir_, tag) in [(Direction::Backward, "bwd"), (Direction::Forward, "fwd")] {
            if !scene.has_motion(t, dir_) {
                continue;
            }
            let list = match dir_ {
                Direction::Backward => &mut e.flows_backward,
                Direction::Forward => &mut e.flows_forward,
            };
            for (v, f) in gt_flow(&scene, &baked, dir_)?.into_iter().enumerate() {
                let name = rel(format!("flow_{tag}_v{v}.g4dr"));
                io::write_raster(out.join(&name), &Raster::Flow(f))?;
                list.push(name);
            }
        }
        let images = render_gt_views(&scene, t as f64, &bake, &rcfg, &RendererKind::Tiled)?;
        for (v, img) in images.iter().enumerate() {
            let name = rel(format!("image_v{v}.g4di"));
            let preview = rel(format!("image_v{v}.png"));
            io::write_image(out.join(&name), img)?;
            io::write_png(out.join(&preview), img)?;
            e.images.push(name);
            e.previews.push(preview);
        }
        manifest.timestamps.push(e);
    }
    io::write_manifest(out.join(MANIFEST_FILE), &manifest)?;

    report.set("manifest", out.join(MANIFEST_FILE).display().to_string());
    report.set("seed", args.seed.to_string());
    report.set("motion", serde_json::to_value(config.motion).unwrap_or_default());
    report.set("timestamps", n);
    report.set("views", config.views);
    report.set("image_size", scene.width());
    report.set("raster_size", raster);
    report.float("scale", scene.scale());
    report.set("gaussians", gaussians);
    Ok(())
}
