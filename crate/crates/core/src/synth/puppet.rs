use nalgebra::{Rotation3, Vector3};
use std::f64::consts::{FRAC_PI_2, PI};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum PartKind {
    Torso,
    Head,
    Arm,
    Leg,
}

/// One capsule-shaped body part. Limbs swing about the x axis through their
/// pivot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Part {
    pub kind: PartKind,
    pub radius: f64,
    /// Half-length of the cylindrical section; 0 gives a sphere.
    pub half_length: f64,
    pub pivot: [f64; 3],
    pub axis: [f64; 3],
    pub phase: f64,
}

impl Part {
    fn center(&self) -> Vector3<f64> {
        let reach = match self.kind {
            PartKind::Arm | PartKind::Leg => self.half_length + self.radius,
            _ => 0.0,
        };
        Vector3::from(self.pivot) + Vector3::from(self.axis).normalize() * reach
    }

    fn swings(&self) -> bool {
        matches!(self.kind, PartKind::Arm | PartKind::Leg)
    }
}

/// Torso, head, then left/right arms and legs, truncated to `count` parts.
pub(crate) fn standard_parts(count: usize, base_phase: f64) -> Vec<Part> {
    let part = |kind, radius, half_length, pivot, axis, phase| Part {
        kind,
        radius,
        half_length,
        pivot,
        axis,
        phase,
    };
    let all = [
        part(
            PartKind::Torso,
            0.17,
            0.22,
            [0.0, 1.15, 0.0],
            [0.0, 1.0, 0.0],
            0.0,
        ),
        part(
            PartKind::Head,
            0.12,
            0.0,
            [0.0, 1.62, 0.0],
            [0.0, 1.0, 0.0],
            0.0,
        ),
        part(
            PartKind::Arm,
            0.05,
            0.22,
            [-0.24, 1.42, 0.0],
            [-0.25, -1.0, 0.0],
            base_phase,
        ),
        part(
            PartKind::Arm,
            0.05,
            0.22,
            [0.24, 1.42, 0.0],
            [0.25, -1.0, 0.0],
            base_phase + PI,
        ),
        part(
            PartKind::Leg,
            0.07,
            0.3,
            [-0.09, 0.85, 0.0],
            [-0.05, -1.0, 0.0],
            base_phase + PI,
        ),
        part(
            PartKind::Leg,
            0.07,
            0.3,
            [0.09, 0.85, 0.0],
            [0.05, -1.0, 0.0],
            base_phase,
        ),
    ];
    all.into_iter().take(count).collect()
}

/// Capsule surface of revolution about the local y axis, centered at the
/// origin, with single pole vertices.
pub(crate) fn capsule(
    radius: f64,
    half_length: f64,
    segments: usize,
    cap_rings: usize,
) -> (Vec<[f64; 3]>, Vec<[u32; 3]>) {
    let mut profile: Vec<(f64, f64)> = Vec::new();
    for i in 1..=cap_rings {
        let phi = -FRAC_PI_2 + i as f64 * FRAC_PI_2 / cap_rings as f64;
        profile.push((-half_length + radius * phi.sin(), radius * phi.cos()));
    }
    if half_length > 0.0 {
        let spacing = 2.0 * PI * radius / segments as f64;
        let n = ((2.0 * half_length / spacing).ceil() as usize).max(1);
        for j in 1..=n {
            profile.push((
                -half_length + 2.0 * half_length * j as f64 / n as f64,
                radius,
            ));
        }
    }
    for i in 1..cap_rings {
        let phi = i as f64 * FRAC_PI_2 / cap_rings as f64;
        profile.push((half_length + radius * phi.sin(), radius * phi.cos()));
    }

    let mut vertices = vec![[0.0, -half_length - radius, 0.0]];
    for &(y, r) in &profile {
        for s in 0..segments {
            let a = 2.0 * PI * s as f64 / segments as f64;
            vertices.push([r * a.cos(), y, r * a.sin()]);
        }
    }
    let top = vertices.len() as u32;
    vertices.push([0.0, half_length + radius, 0.0]);

    let seg = segments as u32;
    let ring = |i: usize, s: u32| 1 + i as u32 * seg + s % seg;
    let mut faces = Vec::new();
    for s in 0..seg {
        faces.push([0, ring(0, s + 1), ring(0, s)]);
    }
    for i in 0..profile.len() - 1 {
        for s in 0..seg {
            faces.push([ring(i, s), ring(i, s + 1), ring(i + 1, s + 1)]);
            faces.push([ring(i, s), ring(i + 1, s + 1), ring(i + 1, s)]);
        }
    }
    let last = profile.len() - 1;
    for s in 0..seg {
        faces.push([top, ring(last, s), ring(last, s + 1)]);
    }
    (vertices, faces)
}

/// Rest geometry of all parts plus the part owning each vertex.
pub(crate) struct Puppet {
    pub parts: Vec<Part>,
    pub rest: Vec<[f64; 3]>,
    pub faces: Vec<[u32; 3]>,
    pub owner: Vec<u32>,
}

impl Puppet {
    pub fn build(parts: Vec<Part>, segments: usize) -> Self {
        let mut rest = Vec::new();
        let mut faces = Vec::new();
        let mut owner = Vec::new();
        for (pi, part) in parts.iter().enumerate() {
            let (v, f) = capsule(
                part.radius,
                part.half_length,
                segments,
                (segments / 4).max(2),
            );
            let axis = Vector3::from(part.axis).normalize();
            let rot = Rotation3::rotation_between(&Vector3::y(), &axis)
                .unwrap_or_else(|| Rotation3::from_axis_angle(&Vector3::x_axis(), PI));
            let c = part.center();
            let base = rest.len() as u32;
            for p in v {
                rest.push((rot * Vector3::from(p) + c).into());
                owner.push(pi as u32);
            }
            faces.extend(f.into_iter().map(|t| t.map(|i| i + base)));
        }
        Self {
            parts,
            rest,
            faces,
            owner,
        }
    }

    /// Vertex positions with each limb swung by `amplitude·sin(frequency·τ + φ)`.
    pub fn pose(&self, tau: f64, amplitude: f64, frequency: f64) -> Vec<[f64; 3]> {
        let rots: Vec<Option<Rotation3<f64>>> = self
            .parts
            .iter()
            .map(|p| {
                let angle = amplitude * ((frequency * tau + p.phase).sin() - p.phase.sin());
                (p.swings() && angle != 0.0)
                    .then(|| Rotation3::from_axis_angle(&Vector3::x_axis(), angle))
            })
            .collect();
        self.rest
            .iter()
            .zip(&self.owner)
            .map(|(v, &o)| match &rots[o as usize] {
                Some(r) => {
                    let pivot = Vector3::from(self.parts[o as usize].pivot);
                    (r * (Vector3::from(*v) - pivot) + pivot).into()
                }
                None => *v,
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::TriangleMesh;

    #[test]
    fn capsule_faces_have_area() {
        for (r, h) in [(0.1, 0.0), (0.05, 0.2), (0.2, 0.5)] {
            let (v, f) = capsule(r, h, 16, 4);
            let m = TriangleMesh::with_sequential_ids(v, f).unwrap();
            for i in 0..m.faces().len() {
                assert!(m.face_area(i) > 1e-8);
            }
        }
    }

    #[test]
    fn capsule_vertices_on_surface() {
        let (r, h) = (0.1, 0.3);
        let (v, _) = capsule(r, h, 12, 3);
        for p in v {
            let y = p[1].clamp(-h, h);
            let d = ((p[1] - y).powi(2) + p[0] * p[0] + p[2] * p[2]).sqrt();
            assert!((d - r).abs() < 1e-12);
        }
    }

    #[test]
    fn pose_at_zero_is_rest() {
        let p = Puppet::build(standard_parts(6, 0.7), 12);
        assert_eq!(p.pose(0.0, 0.4, 0.3), p.rest);
        assert_ne!(p.pose(1.0, 0.4, 0.3), p.rest);
    }
}
