use super::{interpolate, zero_motions};
use crate::dataset::Dataset;
use crate::failure::{usage, Failure, Outcome};
use crate::report::Report;
use crate::{LossMode, LossesArgs, MotionArg};
use anyhow::anyhow;
use g4d_core::fusion::fusion_loss;
use g4d_core::motion::{
    cyclic_weight, flow_loss, project_scene_flow, retargeting_loss, FlowConsistencyParams, LossReport, LossSettings,
    LossWeights,
};
use g4d_core::render::RendererKind;
use g4d_core::synth::render_gt_views;
use g4d_core::{Direction, RenderConfig, Renderer};

pub fn write_loss(r: &LossReport, report: &mut Report) {
    report.float("l2", r.l2);
    report.float("dssim", r.dssim);
    report.float("lpips", r.lpips);
    report.float("total", r.total);
    for (v, terms) in r.per_view.iter().enumerate() {
        report.float(format!("view{v}.total"), terms.total);
    }
}

fn settings(args: &LossesArgs) -> Outcome<LossSettings<'static>> {
    if !(args.lambda_ssim >= 0.0 && args.lambda_ssim.is_finite()) {
        return Err(usage(format!("--lambda-ssim must be non-negative, got {}", args.lambda_ssim)));
    }
    Ok(LossSettings {
        weights: LossWeights {
            ssim: args.lambda_ssim,
            ..Default::default()
        },
        scorer: None,
    })
}

fn retarget(ds: &Dataset, args: &LossesArgs, report: &mut Report) -> Outcome {
    let t = args.time.t.unwrap_or(1);
    if t == 0 {
        return Err(usage("retargeting needs t >= 1"));
    }
    let ft = ds.frame(t)?;
    let fp = ds.frame(t - 1)?;
    let motions = match args.motion {
        MotionArg::Gt => ds.motions(t)?,
        MotionArg::Zero => zero_motions(&ft),
    };
    let cams = ds.raster_cameras(t, ft.width())?;
    let config = RenderConfig::new(ft.width(), ft.height());
    let r = retargeting_loss(&ft, &fp, &motions, &cams, &config, &RendererKind::Tiled, &settings(args)?)?;
    report.set("t", t);
    write_loss(&r, report);
    Ok(())
}

fn flow(ds: &Dataset, args: &LossesArgs, report: &mut Report) -> Outcome {
    let t = args.time.t.unwrap_or(0);
    if t + 1 >= ds.timestamps() {
        return Err(usage(format!("flow loss needs timestamps {t} and {}", t + 1)));
    }
    let ft = ds.frame(t)?;
    let motions = match args.motion {
        MotionArg::Gt => ds.motions(t)?,
        MotionArg::Zero => zero_motions(&ft),
    };
    let cams = ds.raster_cameras(t, ft.width())?;
    let none = || Failure::Data(anyhow!("dataset is missing ground-truth flows around timestamp {t}"));
    let fwd = ds.flows(t, Direction::Forward)?.ok_or_else(none)?;
    let bwd = ds.flows(t + 1, Direction::Backward)?.ok_or_else(none)?;
    if fwd.len() != cams.len() || bwd.len() != cams.len() || motions.len() != cams.len() {
        return Err(Failure::Data(anyhow!("view counts of flows, motions and cameras differ")));
    }
    let params = FlowConsistencyParams::default();
    let mut total = 0.0;
    for v in 0..cams.len() {
        let pred = project_scene_flow(&ft, &motions[v], Direction::Forward, &cams[v])?;
        let loss = flow_loss(&pred, &fwd[v], &bwd[v], &params)?;
        let w = cyclic_weight(&fwd[v], &bwd[v], &params)?;
        let (sum, n) = w
            .weights()
            .iter()
            .zip(fwd[v].valid())
            .filter(|(_, ok)| **ok)
            .fold((0.0, 0usize), |(s, n), (&x, _)| (s + x as f64, n + 1));
        let mean_w = if n > 0 { sum / n as f64 } else { 0.0 };
        report.float(format!("view{v}.flow_loss"), loss);
        report.float(format!("view{v}.mean_cyclic_weight"), mean_w);
        total += loss;
    }
    report.set("t", t);
    report.float("total", total);
    Ok(())
}

fn fusion(ds: &Dataset, args: &LossesArgs, report: &mut Report) -> Outcome {
    let (_, tp, result) = interpolate(ds, &args.time, report)?;
    let scene = ds.scene()?;
    let config = RenderConfig::new(scene.width(), scene.height());
    let renderer = RendererKind::Tiled;
    let rendered = scene
        .cameras()
        .iter()
        .map(|c| renderer.render(&result.cloud, c, &config))
        .collect::<g4d_core::Result<Vec<_>>>()?;
    let targets = render_gt_views(&scene, tp, &ds.manifest.bake, &config, &renderer)?;
    let r = fusion_loss(&rendered, &targets, &settings(args)?)?;
    write_loss(&r, report);
    Ok(())
}

pub fn run(args: &LossesArgs, report: &mut Report) -> Outcome {
    let ds = Dataset::open(&args.time.frames)?;
    report.set("mode", format!("{:?}", args.mode).to_lowercase());
    match args.mode {
        LossMode::Retarget => retarget(&ds, args, report),
        LossMode::Flow => flow(&ds, args, report),
        LossMode::Fusion => fusion(&ds, args, report),
    }
}
