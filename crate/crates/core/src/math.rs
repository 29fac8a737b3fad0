//! Small quaternion and vector helpers shared across modules.
//!
//! Quaternions are stored `[w, x, y, z]`.

use nalgebra::{Matrix3, Vector3};

pub type Quat = [f64; 4];

pub fn quat_norm(q: &Quat) -> f64 {
    (q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3]).sqrt()
}

/// Flips the sign so that `w >= 0` (first non-zero component positive when
/// `w == 0`). `q` and `-q` map to the same representative.
pub fn canonicalize(q: Quat) -> Quat {
    let lead = q.iter().copied().find(|c| *c != 0.0).unwrap_or(0.0);
    if q[0] < 0.0 || (q[0] == 0.0 && lead < 0.0) {
        [-q[0], -q[1], -q[2], -q[3]]
    } else {
        q
    }
}

pub fn quat_to_matrix(q: &Quat) -> Matrix3<f64> {
    let n = quat_norm(q);
    let (w, x, y, z) = (q[0] / n, q[1] / n, q[2] / n, q[3] / n);
    Matrix3::new(
        1.0 - 2.0 * (y * y + z * z),
        2.0 * (x * y - w * z),
        2.0 * (x * z + w * y),
        2.0 * (x * y + w * z),
        1.0 - 2.0 * (x * x + z * z),
        2.0 * (y * z - w * x),
        2.0 * (x * z - w * y),
        2.0 * (y * z + w * x),
        1.0 - 2.0 * (x * x + y * y),
    )
}

pub fn matrix_to_quat(m: &Matrix3<f64>) -> Quat {
    let r = nalgebra::Rotation3::from_matrix_unchecked(*m);
    let uq = nalgebra::UnitQuaternion::from_rotation_matrix(&r);
    canonicalize([uq.w, uq.i, uq.j, uq.k])
}

#[inline]
pub fn v3(a: [f32; 3]) -> Vector3<f64> {
    Vector3::new(a[0] as f64, a[1] as f64, a[2] as f64)
}
