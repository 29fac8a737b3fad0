use crate::failure::{usage, Outcome};
use crate::report::Report;
use crate::GaugeArgs;
use anyhow::Context;
use g4d_core::gauge::{camera_loss_temporal, metric_gauge_temporal, GaugeReport};
use g4d_core::io;

pub fn write_report(r: &GaugeReport, report: &mut Report) {
    report.float("gauge", r.gauge);
    if let Some(g) = r.gauge_literal {
        report.float("gauge_literal", g);
    }
    for (t, row) in r.ratios.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            report.float(format!("ratio.t{t}.cam{}", j + 1), *v);
        }
    }
    if let Some(p) = r.predicted_gauge {
        report.float("predicted_gauge", p);
    }
    if let Some(l) = r.loss {
        report.float("loss.rotation", l.rotation);
        report.float("loss.direction", l.direction);
        report.float("loss.ratio_consistency", l.ratio_consistency);
        report.float("loss.gauge", l.gauge);
        report.float("loss.total", l.total);
    }
}

pub fn run(args: &GaugeArgs, report: &mut Report) -> Outcome {
    if let Some(g) = args.pred_gauge {
        if !(g > 0.0 && g.is_finite()) {
            return Err(usage(format!("--pred-gauge must be positive, got {g}")));
        }
    }
    let pred = io::read_cameras(&args.pred_cams).with_context(|| format!("reading {}", args.pred_cams.display()))?;
    let gt = io::read_cameras(&args.gt_cams).with_context(|| format!("reading {}", args.gt_cams.display()))?;
    let r = match args.pred_gauge {
        Some(g) => camera_loss_temporal(&pred, &gt, g)?,
        None => metric_gauge_temporal(&pred, &gt)?,
    };
    report.set("timestamps", pred.len());
    report.set("cameras", pred.first().map_or(0, Vec::len));
    write_report(&r, report);
    Ok(())
}
