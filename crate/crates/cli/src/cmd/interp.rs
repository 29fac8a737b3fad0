use crate::dataset::Dataset;
use crate::failure::Outcome;
use crate::report::Report;
use crate::InterpArgs;
use g4d_core::{io, GaussianCloud, GaussianFrame, ViewMaps};

/// A cloud stored as a one-view, one-row frame.
pub fn cloud_frame(cloud: &GaussianCloud, timestamp: i64) -> g4d_core::Result<GaussianFrame> {
    let n = cloud.len().max(1);
    let mut maps = ViewMaps::empty(n);
    for (i, (g, _)) in cloud.iter().enumerate() {
        maps.set_gaussian(i, &g);
        maps.valid[i] = true;
    }
    GaussianFrame::new(n, 1, timestamp, vec![maps])
}

pub fn run(args: &InterpArgs, report: &mut Report) -> Outcome {
    let ds = Dataset::open(&args.time.frames)?;
    let (_, tp, result) = super::interpolate(&ds, &args.time, report)?;
    let ply = args.out.extension().is_some_and(|e| e.eq_ignore_ascii_case("ply"));
    if ply {
        io::export_ply(&args.out, &result.cloud)?;
    } else {
        io::write_frame(&args.out, &cloud_frame(&result.cloud, tp.floor() as i64)?)?;
    }
    report.set("out", args.out.display().to_string());
    Ok(())
}
