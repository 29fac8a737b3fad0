//! Metric gauge: translation ratios between predicted and ground-truth
//! cameras, their mean, the camera loss built on them, and metric recovery.
//!
//! Camera 0 of every set is the coordinate reference (zero translation) and
//! is excluded from ratios and direction terms; it contributes only to the
//! rotation term.

use crate::error::{Error, Result};
use crate::math::{canonicalize, quat_norm};
use crate::model::{Camera, CameraSet, GaussianCloud};
use nalgebra::Vector3;

/// Translation norms at or below this are degenerate.
pub const DEGENERATE_EPS: f64 = 1e-9;

/// The four camera-loss summands and their sum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraLoss {
    pub rotation: f64,
    pub direction: f64,
    pub ratio_consistency: f64,
    pub gauge: f64,
    pub total: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaugeReport {
    /// `ratios[t][j]` is the ratio of camera `j + 1` at timestamp index `t`.
    pub ratios: Vec<Vec<f64>>,
    /// Mean of all ratios.
    pub gauge: f64,
    /// Temporal form only: the ratio sum divided by `(n-1)(k-1)` as the
    /// normalization is printed, kept for comparison with [`Self::gauge`].
    pub gauge_literal: Option<f64>,
    pub predicted_gauge: Option<f64>,
    pub loss: Option<CameraLoss>,
}

fn translation_norm(c: &Camera) -> f64 {
    c.translation_vector().norm()
}

fn ratio_checked(camera: Option<usize>, pred: &Camera, gt: &Camera) -> Result<f64> {
    let np = translation_norm(pred);
    let ng = translation_norm(gt);
    if ng <= DEGENERATE_EPS || !ng.is_finite() {
        return Err(Error::DegenerateTranslation { camera, norm: ng });
    }
    if np <= DEGENERATE_EPS || !np.is_finite() {
        return Err(Error::DegenerateTranslation { camera, norm: np });
    }
    Ok(np / ng)
}

/// `‖T_pred‖ / ‖T_gt‖`.
pub fn translation_ratio(pred: &Camera, gt: &Camera) -> Result<f64> {
    ratio_checked(None, pred, gt)
}

fn set_ratios(pred: &CameraSet, gt: &CameraSet) -> Result<Vec<f64>> {
    if pred.len() != gt.len() {
        return Err(Error::LengthMismatch(format!(
            "{} predicted cameras vs {} ground-truth cameras",
            pred.len(),
            gt.len()
        )));
    }
    if pred.len() < 2 {
        return Err(Error::TooFewCameras {
            needed: 2,
            got: pred.len(),
        });
    }
    (1..pred.len())
        .map(|i| ratio_checked(Some(i), &pred[i], &gt[i]))
        .collect()
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    sum / n as f64
}

/// Single-timestamp gauge: mean ratio over cameras `1..n`.
pub fn metric_gauge(pred: &CameraSet, gt: &CameraSet) -> Result<GaugeReport> {
    let ratios = set_ratios(pred, gt)?;
    let gauge = mean(ratios.iter().copied());
    Ok(GaugeReport {
        ratios: vec![ratios],
        gauge,
        gauge_literal: None,
        predicted_gauge: None,
        loss: None,
    })
}

fn check_sequences(pred: &[CameraSet], gt: &[CameraSet]) -> Result<()> {
    if pred.len() != gt.len() {
        return Err(Error::LengthMismatch(format!(
            "{} predicted timestamps vs {} ground-truth timestamps",
            pred.len(),
            gt.len()
        )));
    }
    if pred.is_empty() {
        return Err(Error::TooFewCameras { needed: 2, got: 0 });
    }
    let n = pred[0].len();
    if let Some(bad) = pred.iter().chain(gt.iter()).find(|s| s.len() != n) {
        return Err(Error::LengthMismatch(format!(
            "camera count varies over time ({n} vs {})",
            bad.len()
        )));
    }
    Ok(())
}

/// Gauge over all cameras and timestamps. `gauge` is the mean of every
/// summed ratio; `gauge_literal` divides the same sum by `(n-1)(k-1)`.
/// A one-timestamp sequence is the single-timestamp gauge.
pub fn metric_gauge_temporal(pred: &[CameraSet], gt: &[CameraSet]) -> Result<GaugeReport> {
    check_sequences(pred, gt)?;
    if pred.len() == 1 {
        return metric_gauge(&pred[0], &gt[0]);
    }
    let ratios = pred
        .iter()
        .zip(gt)
        .map(|(p, g)| set_ratios(p, g))
        .collect::<Result<Vec<_>>>()?;
    let sum: f64 = ratios.iter().flatten().sum();
    let count = ratios.iter().map(Vec::len).sum::<usize>();
    let n = pred[0].len();
    let k = pred.len();
    Ok(GaugeReport {
        gauge: sum / count as f64,
        gauge_literal: Some(sum / ((n - 1) * (k - 1)) as f64),
        ratios,
        predicted_gauge: None,
        loss: None,
    })
}

fn quat_distance(a: [f64; 4], b: [f64; 4]) -> f64 {
    let (a, b) = (canonicalize(a), canonicalize(b));
    quat_norm(&[a[0] - b[0], a[1] - b[1], a[2] - b[2], a[3] - b[3]])
}

fn unit(v: Vector3<f64>) -> Vector3<f64> {
    v / v.norm()
}

fn check_predicted_gauge(p: f64) -> Result<()> {
    if !(p > 0.0) || !p.is_finite() {
        return Err(Error::NonPositiveGauge(p));
    }
    Ok(())
}

/// Rotation, direction and ratio-consistency summands of one timestamp.
fn set_terms(pred: &CameraSet, gt: &CameraSet, ratios: &[f64], gauge: f64) -> (f64, f64, f64) {
    let rotation: f64 = pred
        .iter()
        .zip(gt)
        .map(|(p, g)| quat_distance(p.rotation(), g.rotation()))
        .sum();
    let direction: f64 = (1..pred.len())
        .map(|i| (unit(pred[i].translation_vector()) - unit(gt[i].translation_vector())).norm())
        .sum();
    let consistency: f64 = ratios.iter().map(|p| (p - gauge).abs()).sum();
    (rotation, direction, consistency)
}

/// Single-timestamp camera loss with an externally predicted gauge.
pub fn camera_loss(pred: &CameraSet, gt: &CameraSet, predicted_gauge: f64) -> Result<GaugeReport> {
    check_predicted_gauge(predicted_gauge)?;
    let mut report = metric_gauge(pred, gt)?;
    let (rotation, direction, ratio_consistency) =
        set_terms(pred, gt, &report.ratios[0], report.gauge);
    let gauge = (predicted_gauge - report.gauge).abs();
    report.predicted_gauge = Some(predicted_gauge);
    report.loss = Some(CameraLoss {
        rotation,
        direction,
        ratio_consistency,
        gauge,
        total: rotation + direction + ratio_consistency + gauge,
    });
    Ok(report)
}

/// Camera loss summed over timestamps. One predicted gauge is used for every
/// timestamp, so the gauge term is `k·|p̂ - p_gauge|`.
pub fn camera_loss_temporal(
    pred: &[CameraSet],
    gt: &[CameraSet],
    predicted_gauge: f64,
) -> Result<GaugeReport> {
    check_predicted_gauge(predicted_gauge)?;
    let mut report = metric_gauge_temporal(pred, gt)?;
    let (mut rotation, mut direction, mut ratio_consistency) = (0.0, 0.0, 0.0);
    for ((p, g), r) in pred.iter().zip(gt).zip(&report.ratios) {
        let (a, b, c) = set_terms(p, g, r, report.gauge);
        rotation += a;
        direction += b;
        ratio_consistency += c;
    }
    let gauge = pred.len() as f64 * (predicted_gauge - report.gauge).abs();
    report.predicted_gauge = Some(predicted_gauge);
    report.loss = Some(CameraLoss {
        rotation,
        direction,
        ratio_consistency,
        gauge,
        total: rotation + direction + ratio_consistency + gauge,
    });
    Ok(report)
}

/// Maps a ground-truth camera into the model's frame: `T <- gauge * T`.
pub fn apply_gauge_to_camera(gt_cam: &Camera, gauge: f64) -> Result<Camera> {
    check_predicted_gauge(gauge)?;
    Ok(gt_cam.with_translation_scaled(gauge))
}

/// Divides every coordinate by the predicted gauge.
///
/// Gaussian scales and motion vectors live in the same units and must be
/// divided by the same factor; [`cloud_to_metric`] and
/// [`motion_to_metric`] do that.
pub fn to_metric_points(points: &[[f64; 3]], predicted_gauge: f64) -> Result<Vec<[f64; 3]>> {
    check_predicted_gauge(predicted_gauge)?;
    Ok(points
        .iter()
        .map(|p| {
            [
                p[0] / predicted_gauge,
                p[1] / predicted_gauge,
                p[2] / predicted_gauge,
            ]
        })
        .collect())
}

/// Positions and scales divided by the gauge.
pub fn cloud_to_metric(cloud: &GaussianCloud, predicted_gauge: f64) -> Result<GaussianCloud> {
    check_predicted_gauge(predicted_gauge)?;
    let div = |v: [f32; 3]| {
        [
            (v[0] as f64 / predicted_gauge) as f32,
            (v[1] as f64 / predicted_gauge) as f32,
            (v[2] as f64 / predicted_gauge) as f32,
        ]
    };
    GaussianCloud::from_gaussians(cloud.iter().map(|(mut g, tag)| {
        g.position = div(g.position);
        g.scale = div(g.scale);
        (g, tag)
    }))
}

pub fn motion_to_metric(motion: &[[f32; 3]], predicted_gauge: f64) -> Result<Vec<[f32; 3]>> {
    check_predicted_gauge(predicted_gauge)?;
    Ok(motion
        .iter()
        .map(|m| {
            [
                (m[0] as f64 / predicted_gauge) as f32,
                (m[1] as f64 / predicted_gauge) as f32,
                (m[2] as f64 / predicted_gauge) as f32,
            ]
        })
        .collect())
}
