use super::{interpolate, valid_motions, valid_points, zero_motions};
use crate::dataset::Dataset;
use crate::failure::{usage, Failure, Outcome};
use crate::report::Report;
use crate::{DirectionArg, EvalArgs, EvalMode, MotionArg};
use anyhow::anyhow;
use g4d_core::gauge::metric_gauge_temporal;
use g4d_core::metrics::{evaluate_motion, metric_scale_error, psnr, ssim, MotionEvalInput};
use g4d_core::render::RendererKind;
use g4d_core::synth::render_gt_views;
use g4d_core::{Direction, RenderConfig, Renderer};

fn nvs(ds: &Dataset, args: &EvalArgs, report: &mut Report) -> Outcome {
    let (_, tp, result) = interpolate(ds, &args.time, report)?;
    let scene = ds.scene()?;
    let config = RenderConfig::new(scene.width(), scene.height());
    let renderer = RendererKind::Tiled;
    // Stored renders cover the captured timestamps.
    let targets = if tp.fract() == 0.0 {
        ds.images(tp as usize)?
    } else {
        render_gt_views(&scene, tp, &ds.manifest.bake, &config, &renderer)?
    };
    let (mut sp, mut ss) = (0.0, 0.0);
    for (v, (cam, target)) in scene.cameras().iter().zip(&targets).enumerate() {
        let img = renderer.render(&result.cloud, cam, &config)?;
        let (p, s) = (psnr(&img, target)?, ssim(&img, target)?);
        report.float(format!("view{v}.psnr"), p);
        report.float(format!("view{v}.ssim"), s);
        sp += p;
        ss += s;
    }
    let n = targets.len().max(1) as f64;
    report.float("psnr", sp / n);
    report.float("ssim", ss / n);
    Ok(())
}

fn motion(ds: &Dataset, args: &EvalArgs, report: &mut Report) -> Outcome {
    if !args.perturb.is_finite() {
        return Err(usage("--perturb must be finite"));
    }
    let t = args.time.t.unwrap_or(0);
    let last = ds.timestamps().saturating_sub(1);
    if t > last {
        return Err(usage(format!("timestamp {t} not in dataset (has {})", last + 1)));
    }
    let dir = match args.direction {
        Some(DirectionArg::Forward) => Direction::Forward,
        Some(DirectionArg::Backward) => Direction::Backward,
        None if t < last => Direction::Forward,
        None => Direction::Backward,
    };
    let target_t = t as i64 + dir.step();
    if target_t < 0 || target_t > last as i64 {
        return Err(usage(format!("no timestamp {target_t} to move toward")));
    }
    let frame = ds.frame(t)?;
    let motions = match args.motion {
        MotionArg::Gt => ds.motions(t)?,
        MotionArg::Zero => zero_motions(&frame),
    };
    if motions.len() != frame.view_count() {
        return Err(Failure::Data(anyhow!("{} motion fields for {} views", motions.len(), frame.view_count())));
    }
    let points = valid_points(&frame);
    let mut pred = valid_motions(&frame, &motions, dir);
    for m in &mut pred {
        m[0] += args.perturb;
    }
    let mesh = ds.mesh(t)?;
    let target = ds.mesh(target_t as usize)?;
    if target.vertices().len() != mesh.vertices().len() {
        return Err(Failure::Data(anyhow!("meshes of timestamps {t} and {target_t} differ in vertex count")));
    }
    let gt: Vec<[f64; 3]> = mesh
        .vertices()
        .iter()
        .zip(target.vertices())
        .map(|(a, b)| std::array::from_fn(|k| b[k] - a[k]))
        .collect();
    let r = evaluate_motion(&MotionEvalInput {
        points: &points,
        motion: &pred,
        visible: None,
        mesh: &mesh,
        gt_vertex_motion: &gt,
        target_mesh: &target,
    })?;
    report.set("t", t);
    report.set("direction", format!("{dir:?}").to_lowercase());
    report.set("points", r.count);
    report.float("alignment_scale", r.alignment.scale);
    report.float("alignment_residual", r.alignment_residual);
    report.float("motion_error", r.motion_error);
    report.float("retargeted_distance", r.retargeted.all);
    Ok(())
}

fn metric(ds: &Dataset, args: &EvalArgs, report: &mut Report) -> Outcome {
    let t = args.time.t.unwrap_or(0);
    let frame = ds.frame(t)?;
    let gauge = match args.gauge {
        Some(g) if g > 0.0 && g.is_finite() => g,
        Some(g) => return Err(usage(format!("--gauge must be positive, got {g}"))),
        None => metric_gauge_temporal(&ds.cameras()?, &ds.metric_cameras()?)?.gauge,
    };
    let points = valid_points(&frame);
    let err = metric_scale_error(&points, gauge, &ds.metric_mesh(t)?)?;
    report.set("t", t);
    report.set("points", points.len());
    report.float("gauge", gauge);
    report.float("recovered_scale", 1.0 / gauge);
    report.float("true_scale", ds.manifest.scene.scale);
    report.float("metric_scale_error", err);
    Ok(())
}

pub fn run(args: &EvalArgs, report: &mut Report) -> Outcome {
    let ds = Dataset::open(&args.time.frames)?;
    report.set("mode", format!("{:?}", args.mode).to_lowercase());
    match args.mode {
        EvalMode::Nvs => nvs(&ds, args, report),
        EvalMode::Motion => motion(&ds, args, report),
        EvalMode::Metric => metric(&ds, args, report),
    }
}
