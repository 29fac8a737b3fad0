//! Deterministic synthetic 4D scenes: an articulated capsule puppet with
//! exact per-vertex motion annotations, a camera arc, Gaussian baking and
//! ground-truth flow.
//!
//! Vertex positions are snapped to a 2⁻²⁰ grid so that `x^t + m̄_2^t` equals
//! `x^{t+1}` exactly, in `f64` and in `f32`.

mod bake;
mod puppet;
mod raster;
mod texture;

pub use bake::{bake_at_time, bake_gaussians, gt_flow, render_gt_views, BakeParams, BakedFrame};
pub use raster::{rasterize_mesh, SurfaceHit};
pub use texture::Texture;

use crate::error::{Error, Result};
use crate::math::matrix_to_quat;
use crate::metrics::TriangleMesh;
use crate::model::{Camera, CameraSet, Direction, Intrinsics};
use nalgebra::{Matrix3, Rotation3, Vector3};
use puppet::{standard_parts, Puppet};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Grid step of stored vertex positions.
pub const QUANTUM: f64 = 1.0 / (1u64 << 20) as f64;

pub fn quantize(x: f64) -> f64 {
    (x / QUANTUM).round() * QUANTUM
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MotionKind {
    /// Rotation about the vertical axis plus translation.
    Rigid,
    /// Limbs swing; the body stays in place.
    ArticulatedSwing,
    Translation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SceneConfig {
    /// Number of body parts, 0 to 6.
    pub parts: usize,
    pub motion: MotionKind,
    pub timestamps: usize,
    pub views: usize,
    /// Meters per normalized scene unit.
    pub scale: f64,
    /// Square image side in pixels.
    pub image_size: usize,
    /// Focal length as a multiple of the image side.
    pub focal_factor: f64,
    pub camera_distance: f64,
    pub view_spacing_deg: f64,
    /// Per-frame translation in the reference camera's frame.
    pub translation: [f64; 3],
    /// Radians per frame about the vertical axis.
    pub rotation_speed: f64,
    pub swing_amplitude: f64,
    /// Radians of swing phase per frame.
    pub swing_frequency: f64,
    pub texture_frequency: f64,
    /// Segments around each capsule.
    pub segments: usize,
}

impl Default for SceneConfig {
    fn default() -> Self {
        Self {
            parts: 6,
            motion: MotionKind::ArticulatedSwing,
            timestamps: 4,
            views: 4,
            scale: 1.7,
            image_size: 64,
            focal_factor: 1.6,
            camera_distance: 2.4,
            view_spacing_deg: 45.0,
            translation: [0.02, 0.0, 0.0],
            rotation_speed: 0.06,
            swing_amplitude: 0.5,
            swing_frequency: 0.35,
            texture_frequency: 4.0,
            segments: 24,
        }
    }
}

impl SceneConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::BadConfig(m));
        if self.timestamps < 2 {
            return bad(format!("timestamps = {}, need at least 2", self.timestamps));
        }
        if self.views < 2 {
            return bad(format!("views = {}, need at least 2", self.views));
        }
        if self.parts > 6 {
            return bad(format!("parts = {}, at most 6", self.parts));
        }
        if self.image_size == 0 {
            return bad("image_size = 0".into());
        }
        if self.segments < 3 {
            return bad(format!("segments = {}, need at least 3", self.segments));
        }
        let positive = [
            ("scale", self.scale),
            ("focal_factor", self.focal_factor),
            ("texture_frequency", self.texture_frequency),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return bad(format!("{name} = {v} must be positive"));
            }
        }
        if !(self.camera_distance > 1.0) || !self.camera_distance.is_finite() {
            return bad(format!(
                "camera_distance = {} must exceed the scene diameter",
                self.camera_distance
            ));
        }
        let finite = [
            self.view_spacing_deg,
            self.rotation_speed,
            self.swing_amplitude,
            self.swing_frequency,
            self.translation[0],
            self.translation[1],
            self.translation[2],
        ];
        if finite.iter().any(|v| !v.is_finite()) {
            return bad("non-finite motion or camera parameter".into());
        }
        Ok(())
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let c: Self = toml::from_str(text).map_err(|e| Error::BadConfig(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    fn swing(&self) -> (f64, f64) {
        match self.motion {
            MotionKind::ArticulatedSwing => (self.swing_amplitude, self.swing_frequency),
            _ => (0.0, 0.0),
        }
    }

    fn rotation(&self) -> f64 {
        match self.motion {
            MotionKind::Rigid => self.rotation_speed,
            _ => 0.0,
        }
    }

    fn velocity(&self) -> [f64; 3] {
        match self.motion {
            MotionKind::Rigid | MotionKind::Translation => self.translation.map(quantize),
            MotionKind::ArticulatedSwing => [0.0; 3],
        }
    }
}

/// Animated mesh sequence with exact motion annotations and static cameras,
/// expressed in the reference camera's frame in normalized units.
#[derive(Debug, Clone)]
pub struct SynthScene {
    config: SceneConfig,
    seed: u64,
    puppet_rest: Vec<[f64; 3]>,
    faces: Vec<[u32; 3]>,
    owner: Vec<u32>,
    parts: Vec<puppet::Part>,
    norm_center: Vector3<f64>,
    norm_scale: f64,
    reference: (Matrix3<f64>, Vector3<f64>),
    velocity: [f64; 3],
    meshes: Vec<TriangleMesh>,
    backward: Vec<Vec<[f64; 3]>>,
    forward: Vec<Vec<[f64; 3]>>,
    canonical: Vec<[f64; 3]>,
    cameras: CameraSet,
    texture: Texture,
}

/// World-to-camera rotation looking from `eye` at the origin, y down.
fn look_at(eye: Vector3<f64>) -> Matrix3<f64> {
    let z = (-eye).normalize();
    let down = -Vector3::y();
    let x = down.cross(&z).normalize();
    let y = z.cross(&x);
    Matrix3::from_rows(&[x.transpose(), y.transpose(), z.transpose()])
}

/// Generates a scene; identical `(config, seed)` give identical scenes.
pub fn generate_scene(config: &SceneConfig, seed: u64) -> Result<SynthScene> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let base_phase = rng.gen_range(0.0..std::f64::consts::TAU);
    let texture_seed: u64 = rng.gen();
    let parts = standard_parts(config.parts, base_phase);
    let puppet = Puppet::build(parts.clone(), config.segments);

    let (norm_center, norm_scale) = if puppet.rest.is_empty() {
        (Vector3::zeros(), 1.0)
    } else {
        let mut lo = Vector3::repeat(f64::INFINITY);
        let mut hi = Vector3::repeat(f64::NEG_INFINITY);
        for v in &puppet.rest {
            lo = lo.inf(&Vector3::from(*v));
            hi = hi.sup(&Vector3::from(*v));
        }
        let c = (lo + hi) * 0.5;
        let r = puppet
            .rest
            .iter()
            .map(|v| (Vector3::from(*v) - c).norm())
            .fold(0.0, f64::max);
        (c, 1.0 / (2.0 * r))
    };

    let k = config.image_size as f64;
    let intrinsics = Intrinsics {
        fx: config.focal_factor * k,
        fy: config.focal_factor * k,
        cx: (k - 1.0) / 2.0,
        cy: (k - 1.0) / 2.0,
    };
    let spacing = config.view_spacing_deg.to_radians();
    let poses: Vec<(Matrix3<f64>, Vector3<f64>)> = (0..config.views)
        .map(|i| {
            let theta = (i as f64 - (config.views as f64 - 1.0) / 2.0) * spacing;
            let eye = config.camera_distance * Vector3::new(theta.sin(), 0.0, theta.cos());
            let r = look_at(eye);
            (r, -(r * eye))
        })
        .collect();
    let (r0, t0) = poses[0];
    let mut cameras = Vec::with_capacity(config.views);
    for (i, (r, t)) in poses.iter().enumerate() {
        if i == 0 {
            cameras.push(Camera::reference(intrinsics)?);
            continue;
        }
        let ri = r * r0.transpose();
        let ti = t - ri * t0;
        cameras.push(Camera::new(matrix_to_quat(&ri), ti.into(), intrinsics)?);
    }

    let mut scene = SynthScene {
        config: config.clone(),
        seed,
        puppet_rest: puppet.rest.clone(),
        faces: puppet.faces.clone(),
        owner: puppet.owner.clone(),
        parts,
        norm_center,
        norm_scale,
        reference: (r0, t0),
        velocity: config.velocity(),
        meshes: Vec::new(),
        backward: Vec::new(),
        forward: Vec::new(),
        canonical: Vec::new(),
        cameras,
        texture: Texture::new(texture_seed, config.texture_frequency),
    };
    scene.canonical = scene.positions_at(0.0);
    for t in 0..config.timestamps {
        let v = scene.positions_at(t as f64);
        scene
            .meshes
            .push(TriangleMesh::with_sequential_ids(v, scene.faces.clone())?);
    }
    for t in 0..config.timestamps {
        let diff = |o: usize| -> Vec<[f64; 3]> {
            let (a, b) = (scene.meshes[o].vertices(), scene.meshes[t].vertices());
            a.iter()
                .zip(b)
                .map(|(x, y)| std::array::from_fn(|k| x[k] - y[k]))
                .collect()
        };
        let n = scene.faces_vertex_count();
        scene.backward.push(if t > 0 {
            diff(t - 1)
        } else {
            vec![[0.0; 3]; n]
        });
        scene.forward.push(if t + 1 < config.timestamps {
            diff(t + 1)
        } else {
            vec![[0.0; 3]; n]
        });
    }
    Ok(scene)
}

impl SynthScene {
    fn faces_vertex_count(&self) -> usize {
        self.puppet_rest.len()
    }

    /// Vertex positions at continuous time `τ`.
    fn positions_at(&self, tau: f64) -> Vec<[f64; 3]> {
        let puppet = Puppet {
            parts: self.parts.clone(),
            rest: self.puppet_rest.clone(),
            faces: Vec::new(),
            owner: self.owner.clone(),
        };
        let (amp, freq) = self.config.swing();
        let posed = puppet.pose(tau, amp, freq);
        let spin = Rotation3::from_axis_angle(&Vector3::y_axis(), self.config.rotation() * tau);
        let (r0, t0) = self.reference;
        posed
            .iter()
            .map(|v| {
                let n = (Vector3::from(*v) - self.norm_center) * self.norm_scale;
                let w = r0 * (spin * n) + t0;
                std::array::from_fn(|k| quantize(w[k]) + tau * self.velocity[k])
            })
            .collect()
    }

    pub fn config(&self) -> &SceneConfig {
        &self.config
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn timestamps(&self) -> usize {
        self.config.timestamps
    }

    pub fn width(&self) -> usize {
        self.config.image_size
    }

    pub fn height(&self) -> usize {
        self.config.image_size
    }

    /// Meters per normalized unit.
    pub fn scale(&self) -> f64 {
        self.config.scale
    }

    /// Cameras in normalized units; camera 0 is the identity.
    pub fn cameras(&self) -> &[Camera] {
        &self.cameras
    }

    /// Cameras with translations in meters.
    pub fn metric_cameras(&self) -> CameraSet {
        self.cameras
            .iter()
            .map(|c| c.with_translation_scaled(self.config.scale))
            .collect()
    }

    pub fn mesh(&self, t: usize) -> &TriangleMesh {
        &self.meshes[t]
    }

    pub fn meshes(&self) -> &[TriangleMesh] {
        &self.meshes
    }

    /// Mesh at continuous time `τ ∈ [0, k-1]`; equal to [`Self::mesh`] at
    /// integer times.
    pub fn mesh_at(&self, tau: f64) -> Result<TriangleMesh> {
        let hi = (self.timestamps() - 1) as f64;
        if !(0.0..=hi).contains(&tau) {
            return Err(Error::TimeOutOfRange {
                t_prime: tau,
                lo: 0.0,
                hi,
            });
        }
        if tau.fract() == 0.0 {
            return Ok(self.meshes[tau as usize].clone());
        }
        TriangleMesh::with_sequential_ids(self.positions_at(tau), self.faces.clone())
    }

    /// Mesh in meters.
    pub fn metric_mesh(&self, t: usize) -> TriangleMesh {
        let s = self.config.scale;
        let v = self.meshes[t]
            .vertices()
            .iter()
            .map(|p| p.map(|c| c * s))
            .collect();
        self.meshes[t].with_vertices(v).expect("same topology")
    }

    /// Rest-pose vertex positions; texture coordinates.
    pub fn canonical(&self) -> &[[f64; 3]] {
        &self.canonical
    }

    pub fn texture(&self) -> &Texture {
        &self.texture
    }

    /// `m̄_1^t = x^{t-1} - x^t` or `m̄_2^t = x^{t+1} - x^t` per vertex; zeros
    /// where the neighbour frame does not exist.
    pub fn motion(&self, t: usize, direction: Direction) -> &[[f64; 3]] {
        match direction {
            Direction::Backward => &self.backward[t],
            Direction::Forward => &self.forward[t],
        }
    }

    pub fn has_motion(&self, t: usize, direction: Direction) -> bool {
        match direction {
            Direction::Backward => t > 0,
            Direction::Forward => t + 1 < self.timestamps(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> SceneConfig {
        SceneConfig {
            segments: 12,
            ..Default::default()
        }
    }

    #[test]
    fn deterministic() {
        let a = generate_scene(&small(), 3).unwrap();
        let b = generate_scene(&small(), 3).unwrap();
        assert_eq!(a.meshes, b.meshes);
        assert_eq!(a.cameras, b.cameras);
        assert_eq!(a.backward, b.backward);
        let c = generate_scene(&small(), 4).unwrap();
        assert_ne!(a.meshes, c.meshes);
    }

    #[test]
    fn motion_identity_is_exact() {
        for motion in [
            MotionKind::Rigid,
            MotionKind::ArticulatedSwing,
            MotionKind::Translation,
        ] {
            let s = generate_scene(&SceneConfig { motion, ..small() }, 9).unwrap();
            for t in 0..s.timestamps() - 1 {
                let (a, b) = (s.mesh(t).vertices(), s.mesh(t + 1).vertices());
                for ((x, y), m) in a.iter().zip(b).zip(s.motion(t, Direction::Forward)) {
                    for k in 0..3 {
                        assert_eq!(x[k] + m[k], y[k]);
                        assert_eq!(x[k] as f32 + m[k] as f32, y[k] as f32);
                    }
                }
                for ((x, y), m) in b.iter().zip(a).zip(s.motion(t + 1, Direction::Backward)) {
                    for k in 0..3 {
                        assert_eq!(x[k] + m[k], y[k]);
                    }
                }
            }
        }
    }

    #[test]
    fn translation_annotation() {
        let cfg = SceneConfig {
            motion: MotionKind::Translation,
            translation: [0.1, 0.0, 0.0],
            ..small()
        };
        let s = generate_scene(&cfg, 1).unwrap();
        for m in s.motion(1, Direction::Forward) {
            assert!((m[0] - 0.1).abs() < 1e-6);
            assert_eq!(m[1], 0.0);
        }
        assert!(s
            .motion(0, Direction::Backward)
            .iter()
            .all(|m| *m == [0.0; 3]));
    }

    #[test]
    fn zero_speeds_give_zero_motion() {
        let cfg = SceneConfig {
            motion: MotionKind::Rigid,
            translation: [0.0; 3],
            rotation_speed: 0.0,
            ..small()
        };
        let s = generate_scene(&cfg, 1).unwrap();
        for t in 0..s.timestamps() {
            assert!(s
                .motion(t, Direction::Forward)
                .iter()
                .all(|m| *m == [0.0; 3]));
            assert!(s
                .motion(t, Direction::Backward)
                .iter()
                .all(|m| *m == [0.0; 3]));
        }
    }

    #[test]
    fn unit_diameter_and_reference_camera() {
        let s = generate_scene(&small(), 2).unwrap();
        let v = s.mesh(0).vertices();
        let mut diam = 0.0f64;
        for a in v.iter().step_by(7) {
            for b in v {
                diam = diam.max((Vector3::from(*a) - Vector3::from(*b)).norm());
            }
        }
        assert!(diam <= 1.0 + 1e-5 && diam > 0.8, "{diam}");
        assert_eq!(s.cameras()[0].rotation(), [1.0, 0.0, 0.0, 0.0]);
        assert_eq!(s.cameras()[0].translation(), [0.0; 3]);
        // every camera sees the scene center in front of it
        let c = v
            .iter()
            .fold(Vector3::zeros(), |a, p| a + Vector3::from(*p))
            / v.len() as f64;
        for cam in s.cameras() {
            assert!(cam.world_to_camera(&c).z > 1.5);
        }
    }

    #[test]
    fn adjacent_cameras_are_spaced() {
        let s = generate_scene(&small(), 2).unwrap();
        let (a, b) = (s.cameras()[0].center(), s.cameras()[1].center());
        let c = s.cameras()[0].world_to_camera(&Vector3::zeros());
        let _ = c;
        assert!(((a - b).norm() - 2.0 * 2.4 * (22.5f64.to_radians()).sin()).abs() < 1e-9);
    }

    #[test]
    fn bad_configs() {
        for cfg in [
            SceneConfig {
                timestamps: 1,
                ..small()
            },
            SceneConfig {
                views: 1,
                ..small()
            },
            SceneConfig {
                parts: 7,
                ..small()
            },
            SceneConfig {
                scale: 0.0,
                ..small()
            },
        ] {
            assert!(matches!(generate_scene(&cfg, 0), Err(Error::BadConfig(_))));
        }
    }

    #[test]
    fn toml_round_trip() {
        let c = SceneConfig {
            motion: MotionKind::Rigid,
            views: 3,
            ..Default::default()
        };
        assert_eq!(SceneConfig::from_toml(&c.to_toml()).unwrap(), c);
        let partial = SceneConfig::from_toml("motion = \"translation\"\ntimestamps = 3\n").unwrap();
        assert_eq!(partial.motion, MotionKind::Translation);
        assert_eq!(partial.views, 4);
        assert!(SceneConfig::from_toml("bogus = 1").is_err());
    }

    #[test]
    fn continuous_mesh_matches_integer() {
        let s = generate_scene(&small(), 5).unwrap();
        assert_eq!(&s.mesh_at(2.0).unwrap(), s.mesh(2));
        assert!(s.mesh_at(1.5).is_ok());
        assert!(s.mesh_at(3.5).is_err());
    }
}
