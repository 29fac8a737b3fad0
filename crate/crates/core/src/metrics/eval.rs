use crate::error::{Error, Result};
use crate::gauge::to_metric_points;
use crate::metrics::align::{align_to_mesh, SimilarityTransform};
use crate::metrics::mesh::{nearest_on_mesh, SurfacePoint, TriangleMesh};
use nalgebra::Vector3;

fn norm(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    (Vector3::from(*a) - Vector3::from(*b)).norm()
}

/// Mean `‖s·R·m_pred - m̄‖` where `m̄` is the per-vertex GT motion
/// interpolated at each matched surface point.
pub fn motion_error(
    pred_motion: &[[f64; 3]],
    gt_vertex_motion: &[[f64; 3]],
    mesh: &TriangleMesh,
    correspondence: &[SurfacePoint],
    alignment: &SimilarityTransform,
) -> Result<f64> {
    if correspondence.is_empty() {
        return Err(Error::EmptyCorrespondence);
    }
    if pred_motion.len() != correspondence.len() {
        return Err(Error::LengthMismatch(format!(
            "{} motions for {} correspondences",
            pred_motion.len(),
            correspondence.len()
        )));
    }
    if gt_vertex_motion.len() != mesh.vertices().len() {
        return Err(Error::LengthMismatch(format!(
            "{} GT motions for {} vertices",
            gt_vertex_motion.len(),
            mesh.vertices().len()
        )));
    }
    let sum: f64 = pred_motion
        .iter()
        .zip(correspondence)
        .map(|(m, c)| {
            let gt = mesh.interpolate(gt_vertex_motion, c.face, c.bary);
            norm(&alignment.apply_vector(m), &gt)
        })
        .sum();
    Ok(sum / correspondence.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointDistance {
    /// Mean over all points.
    pub all: f64,
    /// Mean over points flagged visible, when flags were supplied and any
    /// point is visible.
    pub visible: Option<f64>,
}

/// Mean nearest-surface distance of `P + M` to the target-time mesh.
pub fn retargeted_point_distance(
    points: &[[f64; 3]],
    motion: &[[f64; 3]],
    target: &TriangleMesh,
    visible: Option<&[bool]>,
) -> Result<PointDistance> {
    if motion.len() != points.len() || visible.is_some_and(|v| v.len() != points.len()) {
        return Err(Error::LengthMismatch(
            "points, motion and visibility differ in length".into(),
        ));
    }
    let moved: Vec<[f64; 3]> = points
        .iter()
        .zip(motion)
        .map(|(p, m)| std::array::from_fn(|k| p[k] + m[k]))
        .collect();
    let hits = nearest_on_mesh(&moved, target)?;
    let all = hits.iter().map(|h| h.distance).sum::<f64>() / hits.len() as f64;
    let visible = visible.and_then(|v| {
        let (s, n) = hits
            .iter()
            .zip(v)
            .filter(|(_, v)| **v)
            .fold((0.0, 0usize), |(s, n), (h, _)| (s + h.distance, n + 1));
        (n > 0).then(|| s / n as f64)
    });
    Ok(PointDistance { all, visible })
}

/// Mean distance of `points / p̂_gauge` to the metric GT mesh, no alignment.
pub fn metric_scale_error(
    points: &[[f64; 3]],
    predicted_gauge: f64,
    mesh: &TriangleMesh,
) -> Result<f64> {
    let metric = to_metric_points(points, predicted_gauge)?;
    let hits = nearest_on_mesh(&metric, mesh)?;
    Ok(hits.iter().map(|h| h.distance).sum::<f64>() / hits.len() as f64)
}

/// Inputs of the dense-motion evaluation at one timestamp.
pub struct MotionEvalInput<'a> {
    pub points: &'a [[f64; 3]],
    pub motion: &'a [[f64; 3]],
    pub visible: Option<&'a [bool]>,
    pub mesh: &'a TriangleMesh,
    /// GT motion per mesh vertex in the evaluated direction.
    pub gt_vertex_motion: &'a [[f64; 3]],
    pub target_mesh: &'a TriangleMesh,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MotionEvalReport {
    pub alignment: SimilarityTransform,
    /// Mean distance of aligned points to the source mesh.
    pub alignment_residual: f64,
    pub motion_error: f64,
    pub retargeted: PointDistance,
    pub count: usize,
}

pub const ALIGN_ITERATIONS: usize = 50;

/// Similarity-aligns the points to the mesh, matches each to its closest
/// surface point, and scores motion and retargeted positions.
pub fn evaluate_motion(input: &MotionEvalInput) -> Result<MotionEvalReport> {
    if input.points.is_empty() {
        return Err(Error::EmptyCorrespondence);
    }
    if input.motion.len() != input.points.len() {
        return Err(Error::LengthMismatch(
            "points and motion differ in length".into(),
        ));
    }
    let alignment = align_to_mesh(input.points, input.mesh, ALIGN_ITERATIONS)?;
    let aligned: Vec<[f64; 3]> = input.points.iter().map(|p| alignment.apply(p)).collect();
    let corr = nearest_on_mesh(&aligned, input.mesh)?;
    let motion_error = motion_error(
        input.motion,
        input.gt_vertex_motion,
        input.mesh,
        &corr,
        &alignment,
    )?;
    let aligned_motion: Vec<[f64; 3]> = input
        .motion
        .iter()
        .map(|m| alignment.apply_vector(m))
        .collect();
    let retargeted =
        retargeted_point_distance(&aligned, &aligned_motion, input.target_mesh, input.visible)?;
    Ok(MotionEvalReport {
        alignment,
        alignment_residual: corr.iter().map(|c| c.distance).sum::<f64>() / corr.len() as f64,
        motion_error,
        retargeted,
        count: corr.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quad(z: f64) -> TriangleMesh {
        TriangleMesh::with_sequential_ids(
            vec![[0.0, 0.0, z], [1.0, 0.0, z], [1.0, 1.0, z], [0.0, 1.0, z]],
            vec![[0, 1, 2], [0, 2, 3]],
        )
        .unwrap()
    }

    #[test]
    fn motion_error_zero_and_offset() {
        let m = quad(0.0);
        let gt = vec![[0.0, 0.0, 0.5]; 4];
        let pts = [[0.2, 0.1, 0.0], [0.7, 0.6, 0.0], [0.3, 0.9, 0.0]];
        let corr = nearest_on_mesh(&pts, &m).unwrap();
        let id = SimilarityTransform::identity();
        let exact = vec![[0.0, 0.0, 0.5]; 3];
        assert_eq!(motion_error(&exact, &gt, &m, &corr, &id).unwrap(), 0.0);
        let off = vec![[0.01, 0.0, 0.5]; 3];
        assert!((motion_error(&off, &gt, &m, &corr, &id).unwrap() - 0.01).abs() < 1e-12);
        assert!(matches!(
            motion_error(&[], &gt, &m, &[], &id),
            Err(Error::EmptyCorrespondence)
        ));
    }

    #[test]
    fn retargeted_distance() {
        let target = quad(0.5);
        let pts = [[0.5, 0.5, 0.0]];
        let r = retargeted_point_distance(&pts, &[[0.0, 0.0, 0.5]], &target, None).unwrap();
        assert_eq!(r.all, 0.0);
        let r = retargeted_point_distance(&pts, &[[0.0; 3]], &target, Some(&[true])).unwrap();
        assert_eq!(r.all, 0.5);
        assert_eq!(r.visible, Some(0.5));
    }

    #[test]
    fn metric_scale() {
        let m = quad(0.0);
        assert_eq!(
            metric_scale_error(&[[0.4, 0.4, 0.0]], 1.0, &m).unwrap(),
            0.0
        );
        assert_eq!(
            metric_scale_error(&[[0.8, 0.8, 0.2]], 2.0, &m).unwrap(),
            0.1
        );
        assert!(metric_scale_error(&[[0.0; 3]], 0.0, &m).is_err());
    }
}
