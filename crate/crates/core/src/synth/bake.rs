use super::raster::{camera_space, intersect, rasterize_mesh, ray, SurfaceHit};
use super::SynthScene;
use crate::error::{Error, Result};
use crate::exec;
use crate::math::{canonicalize, matrix_to_quat};
use crate::metrics::TriangleMesh;
use crate::model::{
    Camera, Direction, FlowField, Gaussian, GaussianFrame, Image, MotionField, ViewMaps,
};
use crate::render::{RenderConfig, Renderer};
use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

/// Depth slack of the visibility test.
pub const OCCLUSION_BIAS: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BakeParams {
    /// Sampling raster side relative to the image side. Doubling it roughly
    /// quadruples the Gaussians per view.
    pub density: f64,
    /// Tangent scale in units of the pixel footprint on the surface.
    pub scale_factor: f64,
    /// Normal-direction scale relative to the tangent scale.
    pub thickness: f64,
    pub opacity: f32,
}

impl Default for BakeParams {
    fn default() -> Self {
        Self {
            density: 1.0,
            scale_factor: 0.7,
            thickness: 0.1,
            opacity: 0.95,
        }
    }
}

impl BakeParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.density > 0.0 && self.density.is_finite()) {
            return Err(Error::BadConfig(format!("density = {}", self.density)));
        }
        if !(self.scale_factor > 0.0 && self.thickness > 0.0) {
            return Err(Error::BadConfig(
                "scale_factor and thickness must be positive".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.opacity) {
            return Err(Error::BadConfig(format!("opacity = {}", self.opacity)));
        }
        Ok(())
    }

    /// Sampling raster side for an image side.
    pub fn raster_size(&self, image_size: usize) -> usize {
        ((image_size as f64 * self.density).round() as usize).max(1)
    }
}

/// Ground-truth Gaussians of one timestamp with their motion annotations.
#[derive(Debug, Clone, PartialEq)]
pub struct BakedFrame {
    pub frame: GaussianFrame,
    /// One field per view; zeros where a direction is undefined.
    pub motions: Vec<MotionField>,
    /// Surface point behind each pixel, per view.
    pub hits: Vec<Vec<Option<SurfaceHit>>>,
    /// Scene cameras resampled to the sampling raster.
    pub cameras: Vec<Camera>,
}

impl BakedFrame {
    pub fn width(&self) -> usize {
        self.frame.width()
    }

    pub fn height(&self) -> usize {
        self.frame.height()
    }
}

fn sampling_cameras(scene: &SynthScene, params: &BakeParams) -> (usize, Vec<Camera>) {
    let size = params.raster_size(scene.width());
    let d = size as f64 / scene.width() as f64;
    (
        size,
        scene
            .cameras()
            .iter()
            .map(|c| c.with_resolution_scaled(d))
            .collect(),
    )
}

/// Disk-shaped Gaussian lying in the face plane, stretched along the slope
/// so it spans one sampling pixel.
fn surface_gaussian(
    mesh: &TriangleMesh,
    scene: &SynthScene,
    camera: &Camera,
    hit: &SurfaceHit,
    params: &BakeParams,
) -> Gaussian {
    let face = hit.face as usize;
    let p = Vector3::from(mesh.interpolate(mesh.vertices(), face, hit.bary));
    let [a, b, c] = mesh.triangle(face);
    let n = (b - a).cross(&(c - a)).normalize();
    let view = (camera.center() - p).normalize();
    let cos = n.dot(&view).abs().max(0.2);
    let mut u = view - n * n.dot(&view);
    if u.norm() < 1e-9 {
        u = if n.x.abs() < 0.9 {
            Vector3::x()
        } else {
            Vector3::y()
        };
        u -= n * n.dot(&u);
    }
    let u = u.normalize();
    let w = n.cross(&u);
    let basis = Matrix3::from_columns(&[u, w, n]);
    let q = canonicalize(matrix_to_quat(&basis));
    let s = params.scale_factor * hit.depth / camera.intrinsics().fx;
    let rest = mesh_point(scene.canonical(), mesh, face, hit.bary);
    Gaussian {
        position: p.map(|v| v as f32).into(),
        opacity: params.opacity,
        color: scene.texture().color(rest),
        rotation: q.map(|v| v as f32),
        scale: [(s / cos) as f32, s as f32, (s * params.thickness) as f32],
    }
}

fn mesh_point(field: &[[f64; 3]], mesh: &TriangleMesh, face: usize, bary: [f64; 3]) -> [f64; 3] {
    mesh.interpolate(field, face, bary)
}

fn bake_mesh(
    scene: &SynthScene,
    mesh: &TriangleMesh,
    params: &BakeParams,
    timestamp: i64,
) -> Result<(GaussianFrame, Vec<Vec<Option<SurfaceHit>>>, Vec<Camera>)> {
    params.validate()?;
    let (size, cameras) = sampling_cameras(scene, params);
    let per_view = exec::map_slice(&cameras, |_, cam| {
        let hits = if mesh.faces().is_empty() {
            vec![None; size * size]
        } else {
            rasterize_mesh(mesh, cam, size, size)
        };
        let mut maps = ViewMaps::empty(size * size);
        for (pix, hit) in hits.iter().enumerate() {
            if let Some(h) = hit {
                maps.set_gaussian(pix, &surface_gaussian(mesh, scene, cam, h, params));
            }
        }
        (maps, hits)
    });
    let (views, hits): (Vec<_>, Vec<_>) = per_view.into_iter().unzip();
    let frame = GaussianFrame::new(size, size, timestamp, views)?;
    Ok((frame, hits, cameras))
}

/// Samples the mesh at timestamp `t` through every camera's pixel grid and
/// attaches the interpolated motion annotations.
pub fn bake_gaussians(scene: &SynthScene, t: usize, params: &BakeParams) -> Result<BakedFrame> {
    if t >= scene.timestamps() {
        return Err(Error::TimeOutOfRange {
            t_prime: t as f64,
            lo: 0.0,
            hi: (scene.timestamps() - 1) as f64,
        });
    }
    let mesh = scene.mesh(t);
    let (frame, hits, cameras) = bake_mesh(scene, mesh, params, t as i64)?;
    let size = frame.width();
    let field = |view_hits: &[Option<SurfaceHit>], dir: Direction| -> Vec<[f32; 3]> {
        let m = scene.motion(t, dir);
        view_hits
            .iter()
            .map(|h| match h {
                Some(h) => mesh_point(m, mesh, h.face as usize, h.bary).map(|v| v as f32),
                None => [0.0; 3],
            })
            .collect()
    };
    let motions = hits
        .iter()
        .enumerate()
        .map(|(v, h)| {
            MotionField::new(
                size,
                size,
                v as u32,
                t as i64,
                field(h, Direction::Backward),
                field(h, Direction::Forward),
            )
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(BakedFrame {
        frame,
        motions,
        hits,
        cameras,
    })
}

/// Gaussians of the mesh at continuous time `τ`, without motion. The frame's
/// timestamp is `τ` rounded down.
pub fn bake_at_time(scene: &SynthScene, tau: f64, params: &BakeParams) -> Result<GaussianFrame> {
    let mesh = scene.mesh_at(tau)?;
    Ok(bake_mesh(scene, &mesh, params, tau.floor() as i64)?.0)
}

/// Optical flow `π(x + m̄) - π(x)` of every baked sample toward `t ± 1`.
///
/// Samples whose displaced point is hidden by the target-time mesh (depth
/// test with [`OCCLUSION_BIAS`]), leaves the raster, or whose direction is
/// undefined are invalid.
pub fn gt_flow(
    scene: &SynthScene,
    baked: &BakedFrame,
    direction: Direction,
) -> Result<Vec<FlowField>> {
    let t = baked.frame.timestamp();
    let (w, h) = (baked.width(), baked.height());
    if t < 0 || t as usize >= scene.timestamps() {
        return Err(Error::TimeOutOfRange {
            t_prime: t as f64,
            lo: 0.0,
            hi: (scene.timestamps() - 1) as f64,
        });
    }
    let t = t as usize;
    if !scene.has_motion(t, direction) {
        return baked
            .cameras
            .iter()
            .map(|_| FlowField::new(w, h, vec![[0.0; 2]; w * h], vec![false; w * h]))
            .collect();
    }
    let src = scene.mesh(t);
    let dst = scene.mesh((t as i64 + direction.step()) as usize);
    let flows = exec::map_slice(&baked.cameras, |v, cam| {
        let zbuf = rasterize_mesh(dst, cam, w, h);
        let cam_dst = camera_space(dst, cam);
        let out: Vec<Option<[f32; 2]>> = baked.hits[v]
            .iter()
            .map(|hit| {
                let hit = hit.as_ref()?;
                let face = hit.face as usize;
                let x = Vector3::from(mesh_point(src.vertices(), src, face, hit.bary));
                let y = Vector3::from(mesh_point(dst.vertices(), dst, face, hit.bary));
                let a = cam.project(&x)?;
                let b = cam.project(&y)?;
                if b[0] < -0.5 || b[1] < -0.5 || b[0] >= w as f64 - 0.5 || b[1] >= h as f64 - 0.5 {
                    return None;
                }
                let depth = cam.world_to_camera(&y).z;
                let d = ray(cam, b[0], b[1]);
                let (cx, cy) = (b[0].round() as i64, b[1].round() as i64);
                let mut nearest = depth;
                for yy in cy - 1..=cy + 1 {
                    for xx in cx - 1..=cx + 1 {
                        if xx < 0 || yy < 0 || xx >= w as i64 || yy >= h as i64 {
                            continue;
                        }
                        let Some(o) = zbuf[yy as usize * w + xx as usize] else {
                            continue;
                        };
                        if o.face as usize == face {
                            continue;
                        }
                        let [p, q, r] = dst.faces()[o.face as usize].map(|i| cam_dst[i as usize]);
                        if let Some((z, _)) = intersect(&d, &p, &q, &r) {
                            nearest = nearest.min(z);
                        }
                    }
                }
                (depth <= nearest + OCCLUSION_BIAS)
                    .then(|| [(b[0] - a[0]) as f32, (b[1] - a[1]) as f32])
            })
            .collect();
        out
    });
    flows
        .into_iter()
        .map(|out| {
            let valid = out.iter().map(Option::is_some).collect();
            let flow = out.into_iter().map(|f| f.unwrap_or([0.0; 2])).collect();
            FlowField::new(w, h, flow, valid)
        })
        .collect()
}

/// Renders the Gaussians baked at time `τ` through every scene camera.
pub fn render_gt_views(
    scene: &SynthScene,
    tau: f64,
    params: &BakeParams,
    config: &RenderConfig,
    renderer: &dyn Renderer,
) -> Result<Vec<Image>> {
    let cloud = bake_at_time(scene, tau, params)?.flatten();
    scene
        .cameras()
        .iter()
        .map(|c| renderer.render(&cloud, c, config))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::nearest_on_mesh_brute_force;
    use crate::motion::{cyclic_weight, FlowConsistencyParams, Lookup};
    use crate::render::RendererKind;
    use crate::synth::{generate_scene, MotionKind, SceneConfig};

    fn scene(motion: MotionKind, size: usize) -> SynthScene {
        let cfg = SceneConfig {
            motion,
            image_size: size,
            segments: 12,
            ..Default::default()
        };
        generate_scene(&cfg, 11).unwrap()
    }

    #[test]
    fn density_scales_counts() {
        let s = scene(MotionKind::Rigid, 32);
        let count = |d: f64| {
            let p = BakeParams {
                density: d,
                ..Default::default()
            };
            bake_gaussians(&s, 1, &p)
                .unwrap()
                .frame
                .view(0)
                .valid_count() as f64
        };
        let ratio = count(2.0) / count(1.0);
        assert!((ratio / 4.0 - 1.0).abs() <= 0.2, "{ratio}");
    }

    #[test]
    fn positions_on_mesh_and_valid() {
        let s = scene(MotionKind::ArticulatedSwing, 24);
        let b = bake_gaussians(&s, 2, &BakeParams::default()).unwrap();
        let cloud = b.frame.flatten();
        assert!(!cloud.is_empty());
        let pts: Vec<[f64; 3]> = cloud.positions().iter().map(|p| p.map(f64::from)).collect();
        let near = nearest_on_mesh_brute_force(&pts, s.mesh(2)).unwrap();
        assert!(near.iter().all(|n| n.distance <= 1e-6));
        for (g, _) in cloud.iter() {
            g.validate("baked").unwrap();
        }
    }

    #[test]
    fn motion_at_vertex_is_annotation() {
        let s = scene(MotionKind::Translation, 16);
        let mesh = s.mesh(1);
        let m = s.motion(1, Direction::Forward);
        let f = mesh.faces()[5];
        let v = mesh_point(m, mesh, 5, [0.0, 1.0, 0.0]);
        assert_eq!(v, m[f[1] as usize]);
    }

    #[test]
    fn out_of_range_time() {
        let s = scene(MotionKind::Rigid, 16);
        assert!(matches!(
            bake_gaussians(&s, 4, &BakeParams::default()),
            Err(Error::TimeOutOfRange { .. })
        ));
    }

    #[test]
    fn static_scene_has_zero_flow() {
        let cfg = SceneConfig {
            motion: MotionKind::Translation,
            translation: [0.0; 3],
            image_size: 24,
            segments: 12,
            ..Default::default()
        };
        let s = generate_scene(&cfg, 2).unwrap();
        let b = bake_gaussians(&s, 1, &BakeParams::default()).unwrap();
        for f in gt_flow(&s, &b, Direction::Forward).unwrap() {
            assert!(f.flow().iter().all(|v| *v == [0.0; 2]));
            let fg = b.hits[0].iter().filter(|h| h.is_some()).count();
            assert!(f.valid().iter().filter(|v| **v).count() > fg / 2);
        }
    }

    #[test]
    fn translation_flow_matches_pinhole() {
        let d = 0.01;
        let cfg = SceneConfig {
            motion: MotionKind::Translation,
            translation: [d, 0.0, 0.0],
            image_size: 32,
            segments: 12,
            ..Default::default()
        };
        let s = generate_scene(&cfg, 2).unwrap();
        let b = bake_gaussians(&s, 1, &BakeParams::default()).unwrap();
        let flows = gt_flow(&s, &b, Direction::Forward).unwrap();
        let f = b.cameras[0].intrinsics().fx;
        let mut checked = 0;
        for (p, hit) in b.hits[0].iter().enumerate() {
            if let (Some(h), true) = (hit, flows[0].valid()[p]) {
                let expected = f * d / h.depth;
                assert!((flows[0].flow()[p][0] as f64 - expected).abs() < 1e-4 * expected.max(1.0));
                assert!(flows[0].flow()[p][1].abs() < 1e-5);
                checked += 1;
            }
        }
        assert!(checked > 50);
    }

    #[test]
    fn forward_backward_cycle_is_consistent() {
        let s = scene(MotionKind::Rigid, 96);
        let b1 = bake_gaussians(&s, 1, &BakeParams::default()).unwrap();
        let b2 = bake_gaussians(&s, 2, &BakeParams::default()).unwrap();
        let fwd = gt_flow(&s, &b1, Direction::Forward).unwrap();
        let bwd = gt_flow(&s, &b2, Direction::Backward).unwrap();
        let params = FlowConsistencyParams {
            lookup: Lookup::Bilinear,
            ..Default::default()
        };
        let w = cyclic_weight(&fwd[0], &bwd[0], &params).unwrap();
        // samples whose bilinear footprint covers one smooth surface patch
        let (width, height) = (fwd[0].width(), fwd[0].height());
        let mut weights = Vec::new();
        for p in 0..width * height {
            if !fwd[0].valid()[p] {
                continue;
            }
            let (x, y) = ((p % width) as f64, (p / width) as f64);
            let mu = fwd[0].flow()[p];
            let (qx, qy) = (x + mu[0] as f64, y + mu[1] as f64);
            let corners: Vec<Option<usize>> = (0..4)
                .map(|k| {
                    let (xx, yy) = (qx.floor() as i64 + (k & 1), qy.floor() as i64 + (k >> 1));
                    let inside =
                        xx >= 0 && yy >= 0 && (xx as usize) < width && (yy as usize) < height;
                    let q = inside.then(|| yy as usize * width + xx as usize)?;
                    bwd[0].valid()[q].then_some(q)
                })
                .collect();
            let Some(c) = corners.into_iter().collect::<Option<Vec<usize>>>() else {
                continue;
            };
            let depth = |q: usize| b2.hits[0][q].unwrap().depth;
            let smooth = c.iter().all(|&q| (depth(q) - depth(c[0])).abs() < 0.02);
            if smooth {
                weights.push(w.weights()[p]);
            }
        }
        assert!(weights.len() > 300, "{}", weights.len());
        weights.sort_by(f32::total_cmp);
        // bilinear lookup of a non-linear flow field leaves sub-pixel residuals
        assert!(weights[weights.len() / 2] > 0.999);
        assert!(weights[weights.len() / 20] > 0.99);
    }

    #[test]
    fn gt_views_deterministic_and_renderer_independent() {
        let s = scene(MotionKind::ArticulatedSwing, 20);
        let config = RenderConfig::new(20, 20);
        let p = BakeParams::default();
        let a = render_gt_views(&s, 1.5, &p, &config, &RendererKind::Reference).unwrap();
        let b = render_gt_views(&s, 1.5, &p, &config, &RendererKind::Reference).unwrap();
        let c = render_gt_views(&s, 1.5, &p, &config, &RendererKind::Tiled).unwrap();
        assert_eq!(a, b);
        for (x, y) in a.iter().zip(&c) {
            let diff = x
                .data()
                .iter()
                .flatten()
                .zip(y.data().iter().flatten())
                .map(|(u, v)| (u - v).abs())
                .fold(0.0, f32::max);
            assert!(diff <= 1e-5);
        }
    }

    #[test]
    fn empty_scene_renders_background() {
        let cfg = SceneConfig {
            parts: 0,
            image_size: 16,
            ..Default::default()
        };
        let s = generate_scene(&cfg, 0).unwrap();
        let config = RenderConfig::new(16, 16);
        let imgs = render_gt_views(
            &s,
            0.0,
            &BakeParams::default(),
            &config,
            &RendererKind::Reference,
        )
        .unwrap();
        for img in imgs {
            assert!(img.data().iter().all(|p| *p == config.background));
        }
    }
}
