use crate::metrics::TriangleMesh;
use crate::model::Camera;
use nalgebra::Vector3;

/// Nearest mesh surface seen through a pixel center.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurfaceHit {
    pub face: u32,
    /// Weights of the face's vertices.
    pub bary: [f64; 3],
    /// Camera-space depth.
    pub depth: f64,
}

const NEAR: f64 = 1e-6;

/// Mesh vertices in a camera's frame.
pub(crate) fn camera_space(mesh: &TriangleMesh, camera: &Camera) -> Vec<Vector3<f64>> {
    mesh.vertices()
        .iter()
        .map(|v| camera.world_to_camera(&Vector3::from(*v)))
        .collect()
}

/// Pixel ray direction with unit z.
pub(crate) fn ray(camera: &Camera, x: f64, y: f64) -> Vector3<f64> {
    let k = camera.intrinsics();
    Vector3::new((x - k.cx) / k.fx, (y - k.cy) / k.fy, 1.0)
}

/// Ray from the camera center against triangle `abc` (two-sided).
/// Returns depth and barycentric weights.
pub(crate) fn intersect(
    d: &Vector3<f64>,
    a: &Vector3<f64>,
    b: &Vector3<f64>,
    c: &Vector3<f64>,
) -> Option<(f64, [f64; 3])> {
    let e1 = b - a;
    let e2 = c - a;
    let p = d.cross(&e2);
    let det = e1.dot(&p);
    if det.abs() < 1e-18 {
        return None;
    }
    let inv = 1.0 / det;
    let s = -a;
    let u = s.dot(&p) * inv;
    if !(0.0..=1.0).contains(&u) {
        return None;
    }
    let q = s.cross(&e1);
    let v = d.dot(&q) * inv;
    if v < 0.0 || u + v > 1.0 {
        return None;
    }
    let t = e2.dot(&q) * inv;
    (t > NEAR).then_some((t, [1.0 - u - v, u, v]))
}

/// Z-buffered ray casting of every pixel center, triangle by triangle.
/// Ties keep the lower face index.
pub fn rasterize_mesh(
    mesh: &TriangleMesh,
    camera: &Camera,
    width: usize,
    height: usize,
) -> Vec<Option<SurfaceHit>> {
    let cam = camera_space(mesh, camera);
    let k = camera.intrinsics();
    let mut buf: Vec<Option<SurfaceHit>> = vec![None; width * height];
    for (fi, f) in mesh.faces().iter().enumerate() {
        let [a, b, c] = f.map(|i| cam[i as usize]);
        if a.z <= NEAR || b.z <= NEAR || c.z <= NEAR {
            continue;
        }
        let proj = [a, b, c].map(|v| [k.fx * v.x / v.z + k.cx, k.fy * v.y / v.z + k.cy]);
        let x0 = proj
            .iter()
            .map(|p| p[0])
            .fold(f64::INFINITY, f64::min)
            .floor()
            .max(0.0);
        let x1 = proj
            .iter()
            .map(|p| p[0])
            .fold(f64::NEG_INFINITY, f64::max)
            .ceil()
            .min((width - 1) as f64);
        let y0 = proj
            .iter()
            .map(|p| p[1])
            .fold(f64::INFINITY, f64::min)
            .floor()
            .max(0.0);
        let y1 = proj
            .iter()
            .map(|p| p[1])
            .fold(f64::NEG_INFINITY, f64::max)
            .ceil()
            .min((height - 1) as f64);
        if x0 > x1 || y0 > y1 {
            continue;
        }
        for y in y0 as usize..=y1 as usize {
            for x in x0 as usize..=x1 as usize {
                let d = ray(camera, x as f64, y as f64);
                if let Some((depth, bary)) = intersect(&d, &a, &b, &c) {
                    let slot = &mut buf[y * width + x];
                    if slot.is_none_or(|h| depth < h.depth) {
                        *slot = Some(SurfaceHit {
                            face: fi as u32,
                            bary,
                            depth,
                        });
                    }
                }
            }
        }
    }
    buf
}
