pub mod eval;
pub mod gauge;
pub mod interp;
pub mod losses;
pub mod render;
pub mod selftest;
pub mod synth;

use crate::dataset::Dataset;
use crate::failure::{usage, Failure, Outcome};
use crate::report::Report;
use crate::{FlowArg, TimeArgs};
use anyhow::{anyhow, Context};
use g4d_core::fusion::{interpolate_time, FlowSource, FusionFunction, Interpolation, InterpolationInput};
use g4d_core::{io, Direction, GaussianFrame, MotionField};

/// Frame pair `(t-1, t)` around a novel time, checked against the dataset.
pub fn resolve_time(ds: &Dataset, args: &TimeArgs) -> Outcome<(usize, f64)> {
    let tp = args.t_prime.ok_or_else(|| usage("--t-prime is required"))?;
    if !tp.is_finite() {
        return Err(usage(format!("--t-prime must be finite, got {tp}")));
    }
    let last = ds.timestamps().saturating_sub(1);
    let t = match args.t {
        Some(t) => t,
        None if tp <= 0.0 => 1,
        None => (tp.ceil() as usize).max(1),
    };
    if t == 0 || t > last {
        return Err(usage(format!("frame pair ({}, {t}) not in dataset with {} timestamps", t as i64 - 1, last + 1)));
    }
    let (lo, hi) = ((t - 1) as f64, t as f64);
    if !(lo..=hi).contains(&tp) {
        return Err(usage(format!("--t-prime {tp} outside [{lo}, {hi}]")));
    }
    Ok((t, tp))
}

pub fn parse_fusion(spec: &str) -> Outcome<FusionFunction> {
    if spec == "avg" {
        return Ok(FusionFunction::Average);
    }
    match spec.strip_prefix("mlp:") {
        Some(path) if !path.is_empty() => {
            let mlp = io::read_weights(path).with_context(|| format!("reading {path}"))?;
            Ok(FusionFunction::Mlp(mlp))
        }
        _ => Err(usage(format!("--fusion must be avg or mlp:<path>, got {spec:?}"))),
    }
}

pub fn check_tau(tau: f64) -> Outcome {
    if !(tau >= 0.0 && tau.is_finite()) {
        return Err(usage(format!("--tau must be a non-negative number, got {tau}")));
    }
    Ok(())
}

pub fn zero_motions(frame: &GaussianFrame) -> Vec<MotionField> {
    (0..frame.view_count())
        .map(|v| MotionField::zeros(frame.width(), frame.height(), v as u32, frame.timestamp()))
        .collect()
}

fn missing(what: &str, t: usize) -> Failure {
    Failure::Data(anyhow!("dataset has no {what} flows at timestamp {t}"))
}

/// Interpolated Gaussians at `t'` from the dataset frames `t-1` and `t`.
pub fn interpolate(ds: &Dataset, args: &TimeArgs, report: &mut Report) -> Outcome<(usize, f64, Interpolation)> {
    let (t, tp) = resolve_time(ds, args)?;
    check_tau(args.tau)?;
    let fusion = parse_fusion(&args.fusion)?;
    let (ft, fp) = (ds.frame(t)?, ds.frame(t - 1)?);
    let (mt, mp) = (ds.motions(t)?, ds.motions(t - 1)?);
    let (bwd, fwd, cams);
    let flows = match args.flows {
        FlowArg::Gt => {
            bwd = ds.flows(t, Direction::Backward)?.ok_or_else(|| missing("backward", t))?;
            fwd = ds.flows(t - 1, Direction::Forward)?.ok_or_else(|| missing("forward", t - 1))?;
            FlowSource::Given {
                backward: &bwd,
                forward: &fwd,
            }
        }
        FlowArg::Project => {
            cams = ds.raster_cameras(t, ft.width())?;
            FlowSource::Project(&cams)
        }
    };
    let input = InterpolationInput {
        frame_t: &ft,
        frame_tm1: &fp,
        motions_t: &mt,
        motions_tm1: &mp,
        flows,
    };
    let result = interpolate_time(&input, tp, args.tau, &fusion)?;
    report.set("t", t);
    report.float("t_prime", tp);
    report.float("tau", args.tau);
    report.set("fusion", args.fusion.clone());
    report.set("pairs", result.pairs);
    report.set("occluded_t", result.occluded_t);
    report.set("occluded_t_minus_1", result.occluded_tm1);
    report.set("gaussians", result.cloud.len());
    Ok((t, tp, result))
}

/// Valid Gaussian positions of every view, in view then pixel order.
pub fn valid_points(frame: &GaussianFrame) -> Vec<[f64; 3]> {
    frame
        .views()
        .iter()
        .flat_map(|v| v.positions.iter().zip(&v.valid).filter(|(_, ok)| **ok).map(|(p, _)| p.map(f64::from)))
        .collect()
}

/// Motions of the valid pixels, matching [`valid_points`].
pub fn valid_motions(frame: &GaussianFrame, motions: &[MotionField], dir: Direction) -> Vec<[f64; 3]> {
    frame
        .views()
        .iter()
        .zip(motions)
        .flat_map(|(v, m)| {
            m.direction(dir)
                .iter()
                .zip(&v.valid)
                .filter(|(_, ok)| **ok)
                .map(|(d, _)| d.map(f64::from))
        })
        .collect()
}
