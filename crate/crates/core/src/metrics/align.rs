use crate::error::{Error, Result};
use crate::math::{matrix_to_quat, quat_to_matrix, Quat};
use crate::metrics::mesh::{MeshIndex, TriangleMesh};
use nalgebra::{Matrix3, Vector3};

/// `y = s·R(q)·x + t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimilarityTransform {
    pub scale: f64,
    pub rotation: Quat,
    pub translation: [f64; 3],
}

impl Default for SimilarityTransform {
    fn default() -> Self {
        Self::identity()
    }
}

impl SimilarityTransform {
    pub fn identity() -> Self {
        Self {
            scale: 1.0,
            rotation: [1.0, 0.0, 0.0, 0.0],
            translation: [0.0; 3],
        }
    }

    pub fn rotation_matrix(&self) -> Matrix3<f64> {
        quat_to_matrix(&self.rotation)
    }

    pub fn apply(&self, p: &[f64; 3]) -> [f64; 3] {
        (self.scale * (self.rotation_matrix() * Vector3::from(*p))
            + Vector3::from(self.translation))
        .into()
    }

    /// `s·R·v`, for displacements.
    pub fn apply_vector(&self, v: &[f64; 3]) -> [f64; 3] {
        (self.scale * (self.rotation_matrix() * Vector3::from(*v))).into()
    }

    pub fn inverse(&self) -> Self {
        let rt = self.rotation_matrix().transpose();
        let t = -(rt * Vector3::from(self.translation)) / self.scale;
        Self {
            scale: 1.0 / self.scale,
            rotation: matrix_to_quat(&rt),
            translation: t.into(),
        }
    }

    /// `self ∘ other`: apply `other` first.
    pub fn compose(&self, other: &Self) -> Self {
        let r = self.rotation_matrix();
        let t =
            self.scale * (r * Vector3::from(other.translation)) + Vector3::from(self.translation);
        Self {
            scale: self.scale * other.scale,
            rotation: matrix_to_quat(&(r * other.rotation_matrix())),
            translation: t.into(),
        }
    }
}

/// Root-mean-square of `‖T(src_i) - dst_i‖`.
pub fn alignment_rms(t: &SimilarityTransform, src: &[[f64; 3]], dst: &[[f64; 3]]) -> f64 {
    let s: f64 = src
        .iter()
        .zip(dst)
        .map(|(a, b)| (Vector3::from(t.apply(a)) - Vector3::from(*b)).norm_squared())
        .sum();
    (s / src.len().max(1) as f64).sqrt()
}

/// Least-squares similarity mapping `src` onto `dst` (closed form via SVD of
/// the cross-covariance).
pub fn similarity_align(src: &[[f64; 3]], dst: &[[f64; 3]]) -> Result<SimilarityTransform> {
    if src.len() != dst.len() {
        return Err(Error::LengthMismatch(format!(
            "{} vs {} points",
            src.len(),
            dst.len()
        )));
    }
    if src.len() < 3 {
        return Err(Error::DegenerateConfiguration(format!(
            "{} correspondences",
            src.len()
        )));
    }
    let n = src.len() as f64;
    let mean = |pts: &[[f64; 3]]| {
        pts.iter()
            .fold(Vector3::zeros(), |a, p| a + Vector3::from(*p))
            / n
    };
    let (mx, my) = (mean(src), mean(dst));
    let mut cov = Matrix3::zeros();
    let mut sxx = Matrix3::zeros();
    let mut var = 0.0;
    for (a, b) in src.iter().zip(dst) {
        let x = Vector3::from(*a) - mx;
        let y = Vector3::from(*b) - my;
        cov += y * x.transpose();
        sxx += x * x.transpose();
        var += x.norm_squared();
    }
    cov /= n;
    var /= n;

    // collinear sources leave the rotation about their line undetermined
    let sv = sxx.symmetric_eigenvalues();
    let mut sv: Vec<f64> = sv.iter().copied().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    if !(sv[0] > 0.0) || sv[1] <= 1e-12 * sv[0] {
        return Err(Error::DegenerateConfiguration(
            "source points are collinear or coincident".into(),
        ));
    }

    let svd = cov.svd(true, true);
    let (u, vt) = (svd.u.unwrap(), svd.v_t.unwrap());
    // flip the smallest singular direction to avoid a reflection
    let mut s = Matrix3::identity();
    if u.determinant() * vt.determinant() < 0.0 {
        let d = svd.singular_values;
        let k = (0..3).min_by(|&a, &b| d[a].total_cmp(&d[b])).unwrap();
        s[(k, k)] = -1.0;
    }
    let r = u * s * vt;
    let scale = (Matrix3::from_diagonal(&svd.singular_values) * s).trace() / var;
    let t = my - scale * (r * mx);
    Ok(SimilarityTransform {
        scale,
        rotation: matrix_to_quat(&r),
        translation: t.into(),
    })
}

/// Iterated closest-point similarity alignment of `points` onto `mesh`,
/// starting from identity. Stops when the RMS distance stops improving.
pub fn align_to_mesh(
    points: &[[f64; 3]],
    mesh: &TriangleMesh,
    max_iterations: usize,
) -> Result<SimilarityTransform> {
    let index = MeshIndex::new(mesh)?;
    let rms_of = |t: &SimilarityTransform| -> (f64, Vec<[f64; 3]>, Vec<[f64; 3]>) {
        let moved: Vec<[f64; 3]> = points.iter().map(|p| t.apply(p)).collect();
        let targets: Vec<[f64; 3]> = moved.iter().map(|p| index.closest(p).point).collect();
        let s: f64 = moved
            .iter()
            .zip(&targets)
            .map(|(a, b)| (Vector3::from(*a) - Vector3::from(*b)).norm_squared())
            .sum();
        ((s / points.len().max(1) as f64).sqrt(), moved, targets)
    };
    let mut current = SimilarityTransform::identity();
    let (mut rms, mut moved, mut targets) = rms_of(&current);
    for _ in 0..max_iterations {
        if rms == 0.0 {
            break;
        }
        let step = similarity_align(&moved, &targets)?;
        let next = step.compose(&current);
        let (r, m, t) = rms_of(&next);
        if !(r < rms) {
            break;
        }
        let converged = rms - r < 1e-12 * rms.max(1.0);
        (current, rms, moved, targets) = (next, r, m, t);
        if converged {
            break;
        }
    }
    Ok(current)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::canonicalize;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_points(rng: &mut ChaCha8Rng, n: usize) -> Vec<[f64; 3]> {
        (0..n)
            .map(|_| std::array::from_fn(|_| rng.gen_range(-1.0..1.0)))
            .collect()
    }

    fn random_quat(rng: &mut ChaCha8Rng) -> Quat {
        let q: [f64; 4] = std::array::from_fn(|_| rng.gen_range(-1.0..1.0));
        let n = q.iter().map(|c| c * c).sum::<f64>().sqrt();
        canonicalize(q.map(|c| c / n))
    }

    #[test]
    fn identity_recovered() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let p = random_points(&mut rng, 20);
        let t = similarity_align(&p, &p).unwrap();
        assert!((t.scale - 1.0).abs() < 1e-12);
        assert!((t.rotation[0] - 1.0).abs() < 1e-12);
        assert!(t.translation.iter().all(|c| c.abs() < 1e-12));
    }

    #[test]
    fn scaled_and_shifted() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let p = random_points(&mut rng, 10);
        let q: Vec<[f64; 3]> = p
            .iter()
            .map(|v| [2.0 * v[0] + 1.0, 2.0 * v[1], 2.0 * v[2]])
            .collect();
        let t = similarity_align(&p, &q).unwrap();
        assert!((t.scale - 2.0).abs() < 1e-12);
        assert!((t.translation[0] - 1.0).abs() < 1e-12);
        assert!(alignment_rms(&t, &p, &q) < 1e-12);
    }

    #[test]
    fn random_similarity_recovered() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let p = random_points(&mut rng, 30);
            let truth = SimilarityTransform {
                scale: rng.gen_range(0.2..5.0),
                rotation: random_quat(&mut rng),
                translation: std::array::from_fn(|_| rng.gen_range(-3.0..3.0)),
            };
            let q: Vec<[f64; 3]> = p.iter().map(|v| truth.apply(v)).collect();
            let t = similarity_align(&p, &q).unwrap();
            assert!(alignment_rms(&t, &p, &q) <= 1e-6);
            assert!((t.scale - truth.scale).abs() < 1e-9);
        }
    }

    #[test]
    fn reflection_is_not_returned() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let p = random_points(&mut rng, 15);
        let q: Vec<[f64; 3]> = p.iter().map(|v| [-v[0], v[1], v[2]]).collect();
        let t = similarity_align(&p, &q).unwrap();
        assert!((t.rotation_matrix().determinant() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn degenerate_inputs() {
        let line: Vec<[f64; 3]> = (0..5).map(|i| [i as f64, 2.0 * i as f64, 0.0]).collect();
        assert!(matches!(
            similarity_align(&line, &line),
            Err(Error::DegenerateConfiguration(_))
        ));
        let two = [[0.0; 3], [1.0, 0.0, 0.0]];
        assert!(matches!(
            similarity_align(&two, &two),
            Err(Error::DegenerateConfiguration(_))
        ));
    }

    #[test]
    fn inverse_and_compose() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let t = SimilarityTransform {
            scale: 1.7,
            rotation: random_quat(&mut rng),
            translation: [0.3, -2.0, 1.0],
        };
        let id = t.compose(&t.inverse());
        assert!((id.scale - 1.0).abs() < 1e-12);
        assert!((id.rotation[0] - 1.0).abs() < 1e-6);
        assert!(id.translation.iter().all(|c| c.abs() < 1e-6));
    }

    #[test]
    fn rotation_equivariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let p = random_points(&mut rng, 25);
        let truth = SimilarityTransform {
            scale: 1.3,
            rotation: random_quat(&mut rng),
            translation: [0.5, 0.1, -0.2],
        };
        let q: Vec<[f64; 3]> = p.iter().map(|v| truth.apply(v)).collect();
        let r0 = SimilarityTransform {
            scale: 1.0,
            rotation: random_quat(&mut rng),
            translation: [0.0; 3],
        };
        let p0: Vec<[f64; 3]> = p.iter().map(|v| r0.apply(v)).collect();
        let a = similarity_align(&p, &q).unwrap();
        let b = similarity_align(&p0, &q).unwrap();
        let expected = a.rotation_matrix() * r0.rotation_matrix().transpose();
        assert!((b.rotation_matrix() - expected).abs().max() < 1e-9);
        assert!((a.scale - b.scale).abs() < 1e-12);
    }
}
