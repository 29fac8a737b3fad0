//! Gaussian-splat rasterization.
//!
//! [`render`] bins splats into screen tiles and composites each tile
//! independently; [`render_reference`] visits every splat for every pixel.
//! Both share the projection, the depth order and the per-pixel compositing
//! routine, and tile binning is conservative, so the two produce identical
//! images.
//!
//! Pixel centers are at integer coordinates: pixel `(x, y)` samples the image
//! plane at `(x, y)`.

use crate::error::{Error, Result};
use crate::exec;
use crate::math::{quat_to_matrix, v3};
use crate::model::{Camera, Gaussian, GaussianCloud, Image, SourceTag};
use nalgebra::{Matrix2x3, Matrix3, Vector3};

/// Low-pass dilation added to the 2D covariance diagonal, in px².
pub const COV_DILATION: f64 = 0.3;
/// Per-splat alpha cap.
pub const MAX_ALPHA: f32 = 0.99;
/// Contributions below this alpha are skipped.
pub const MIN_ALPHA: f32 = 1.0 / 255.0;
/// Compositing stops before transmittance would fall below this.
pub const MIN_TRANSMITTANCE: f32 = 1e-4;
const SINGULAR_DET: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RenderConfig {
    pub width: usize,
    pub height: usize,
    pub background: [f32; 3],
    /// Camera-space depth at or below which Gaussians are culled.
    pub near: f64,
    /// Cutoff radius in standard deviations.
    pub cutoff: f64,
    pub tile_size: usize,
}

impl RenderConfig {
    pub fn new(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            background: [1.0; 3],
            near: 0.01,
            cutoff: 3.0,
            tile_size: 16,
        }
    }

    pub fn with_background(mut self, bg: [f32; 3]) -> Self {
        self.background = bg;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::BadRenderConfig(format!(
                "image size {}x{}",
                self.width, self.height
            )));
        }
        if !(self.cutoff > 0.0) || !self.cutoff.is_finite() {
            return Err(Error::BadRenderConfig(format!("cutoff {}", self.cutoff)));
        }
        if self.tile_size == 0 {
            return Err(Error::BadRenderConfig("tile size 0".into()));
        }
        if !self.near.is_finite() || self.background.iter().any(|c| !c.is_finite()) {
            return Err(Error::BadRenderConfig(
                "non-finite near plane or background".into(),
            ));
        }
        Ok(())
    }
}

/// A Gaussian projected to the image plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Splat2D {
    /// Pixel coordinates of the projected mean.
    pub mean: [f64; 2],
    /// Dilated 2D covariance `[xx, xy, yy]` in px².
    pub cov: [f64; 3],
    /// Camera-space depth.
    pub depth: f64,
    pub color: [f32; 3],
    /// `min(0.99, opacity)`.
    pub alpha_scale: f32,
    /// Conservative extent: `cutoff * sqrt(max eigenvalue of cov)`.
    pub radius: f64,
}

impl Splat2D {
    pub fn determinant(&self) -> f64 {
        self.cov[0] * self.cov[2] - self.cov[1] * self.cov[1]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Projection {
    Splat(Splat2D),
    Culled,
}

/// `R(q) diag(s²) R(q)ᵀ`.
pub fn covariance_3d(rotation: [f32; 4], scale: [f32; 3]) -> Matrix3<f64> {
    let r = quat_to_matrix(&rotation.map(|c| c as f64));
    let s = Matrix3::from_diagonal(&Vector3::new(
        (scale[0] as f64).powi(2),
        (scale[1] as f64).powi(2),
        (scale[2] as f64).powi(2),
    ));
    r * s * r.transpose()
}

/// EWA projection of one Gaussian: `Σ' = J W Σ Wᵀ Jᵀ + 0.3·I`.
pub fn project_gaussian(g: &Gaussian, camera: &Camera, config: &RenderConfig) -> Projection {
    let w = camera.rotation_matrix();
    project_with(g, camera, &w, config)
}

fn project_with(
    g: &Gaussian,
    camera: &Camera,
    w: &Matrix3<f64>,
    config: &RenderConfig,
) -> Projection {
    let t = w * v3(g.position) + camera.translation_vector();
    if !(t.z > config.near) {
        return Projection::Culled;
    }
    let k = camera.intrinsics();
    let (iz, iz2) = (1.0 / t.z, 1.0 / (t.z * t.z));
    let j = Matrix2x3::new(
        k.fx * iz,
        0.0,
        -k.fx * t.x * iz2,
        0.0,
        k.fy * iz,
        -k.fy * t.y * iz2,
    );
    let m = j * w;
    let cov = m * covariance_3d(g.rotation, g.scale) * m.transpose();
    let a = cov[(0, 0)] + COV_DILATION;
    let b = cov[(0, 1)];
    let c = cov[(1, 1)] + COV_DILATION;
    let mean = [k.fx * t.x * iz + k.cx, k.fy * t.y * iz + k.cy];

    let mid = 0.5 * (a + c);
    let disc = (mid * mid - (a * c - b * b)).max(0.0).sqrt();
    let radius = config.cutoff * (mid + disc).sqrt();

    // Conservative: one extra pixel of slack on every side.
    let reach = radius + 1.0;
    if mean[0] + reach < 0.0
        || mean[1] + reach < 0.0
        || mean[0] - reach > (config.width - 1) as f64
        || mean[1] - reach > (config.height - 1) as f64
        || !radius.is_finite()
    {
        return Projection::Culled;
    }
    Projection::Splat(Splat2D {
        mean,
        cov: [a, b, c],
        depth: t.z,
        color: g.color,
        alpha_scale: g.opacity.min(MAX_ALPHA),
        radius,
    })
}

/// Compact form used by the compositing loop.
#[derive(Debug, Clone, Copy)]
struct Packed {
    mx: f32,
    my: f32,
    // inverse covariance (conic)
    ca: f32,
    cb: f32,
    cc: f32,
    alpha: f32,
    color: [f32; 3],
}

struct Prepared {
    /// Depth-sorted splats.
    splats: Vec<Packed>,
    /// Pixel bounds `[x0, y0, x1, y1]` (inclusive) per sorted splat.
    bounds: Vec<[i32; 4]>,
}

fn sort_key_cmp(a: &(f64, SourceTag, u32), b: &(f64, SourceTag, u32)) -> std::cmp::Ordering {
    a.0.total_cmp(&b.0)
        .then_with(|| a.1.cmp(&b.1))
        .then_with(|| a.2.cmp(&b.2))
}

fn prepare(cloud: &GaussianCloud, camera: &Camera, config: &RenderConfig) -> Result<Prepared> {
    config.validate()?;
    let w = camera.rotation_matrix();
    let projected = exec::map_range(cloud.len(), |i| {
        project_with(&cloud.get(i), camera, &w, config)
    });

    let mut keys = Vec::with_capacity(cloud.len());
    for (i, p) in projected.iter().enumerate() {
        if let Projection::Splat(s) = p {
            let det = s.determinant();
            if !(det > SINGULAR_DET) {
                return Err(Error::SingularCovariance { index: i, det });
            }
            keys.push((s.depth, cloud.sources()[i], i as u32));
        }
    }
    exec::sort_unstable_by(&mut keys, sort_key_cmp);

    let (wmax, hmax) = (config.width as i32 - 1, config.height as i32 - 1);
    let mut splats = Vec::with_capacity(keys.len());
    let mut bounds = Vec::with_capacity(keys.len());
    for &(_, _, i) in &keys {
        let Projection::Splat(s) = projected[i as usize] else {
            unreachable!()
        };
        let det = s.determinant();
        let reach = s.radius + 1.0;
        splats.push(Packed {
            mx: s.mean[0] as f32,
            my: s.mean[1] as f32,
            ca: (s.cov[2] / det) as f32,
            cb: (-s.cov[1] / det) as f32,
            cc: (s.cov[0] / det) as f32,
            alpha: s.alpha_scale,
            color: s.color,
        });
        bounds.push([
            ((s.mean[0] - reach).ceil() as i32).clamp(0, wmax),
            ((s.mean[1] - reach).ceil() as i32).clamp(0, hmax),
            ((s.mean[0] + reach).floor() as i32).clamp(0, wmax),
            ((s.mean[1] + reach).floor() as i32).clamp(0, hmax),
        ]);
    }
    Ok(Prepared { splats, bounds })
}

/// Front-to-back compositing of the splats named by `order` at one pixel.
#[inline(always)]
fn composite<I>(
    px: f32,
    py: f32,
    splats: &[Packed],
    order: I,
    cutoff_sq: f32,
    bg: [f32; 3],
) -> [f32; 3]
where
    I: Iterator<Item = u32>,
{
    let mut t = 1.0f32;
    let mut c = [0.0f32; 3];
    for i in order {
        let s = &splats[i as usize];
        let dx = px - s.mx;
        let dy = py - s.my;
        let power = s.ca * dx * dx + 2.0 * s.cb * dx * dy + s.cc * dy * dy;
        if power > cutoff_sq {
            continue;
        }
        let alpha = (s.alpha * (-0.5 * power).exp()).min(MAX_ALPHA);
        if alpha < MIN_ALPHA {
            continue;
        }
        let next_t = t * (1.0 - alpha);
        if next_t < MIN_TRANSMITTANCE {
            break;
        }
        let wgt = alpha * t;
        c[0] += s.color[0] * wgt;
        c[1] += s.color[1] * wgt;
        c[2] += s.color[2] * wgt;
        t = next_t;
    }
    [c[0] + bg[0] * t, c[1] + bg[1] * t, c[2] + bg[2] * t]
}

/// Tile-binned renderer.
pub fn render(cloud: &GaussianCloud, camera: &Camera, config: &RenderConfig) -> Result<Image> {
    let prep = prepare(cloud, camera, config)?;
    let (w, h, ts) = (config.width, config.height, config.tile_size);
    let tiles_x = w.div_ceil(ts);
    let tiles_y = h.div_ceil(ts);

    // counting sort of (tile, splat) pairs; splat order within a tile stays
    // the global depth order
    let mut offsets = vec![0u32; tiles_x * tiles_y + 1];
    for b in &prep.bounds {
        let (tx0, ty0, tx1, ty1) = tile_range(b, ts);
        for ty in ty0..=ty1 {
            for tx in tx0..=tx1 {
                offsets[ty * tiles_x + tx + 1] += 1;
            }
        }
    }
    for i in 1..offsets.len() {
        offsets[i] += offsets[i - 1];
    }
    let mut cursor = offsets.clone();
    let mut lists = vec![0u32; *offsets.last().unwrap() as usize];
    for (si, b) in prep.bounds.iter().enumerate() {
        let (tx0, ty0, tx1, ty1) = tile_range(b, ts);
        for ty in ty0..=ty1 {
            for tx in tx0..=tx1 {
                let slot = &mut cursor[ty * tiles_x + tx];
                lists[*slot as usize] = si as u32;
                *slot += 1;
            }
        }
    }

    let cutoff_sq = (config.cutoff * config.cutoff) as f32;
    let bg = config.background;
    let mut data = vec![bg; w * h];
    exec::for_each_chunk_mut(&mut data, ts * w, |band, rows| {
        let y0 = band * ts;
        let band_rows = rows.len() / w;
        for tx in 0..tiles_x {
            let tile = band * tiles_x + tx;
            let list = &lists[offsets[tile] as usize..offsets[tile + 1] as usize];
            if list.is_empty() {
                continue;
            }
            let x0 = tx * ts;
            let x1 = (x0 + ts).min(w);
            for ry in 0..band_rows {
                let py = (y0 + ry) as f32;
                for x in x0..x1 {
                    rows[ry * w + x] = composite(
                        x as f32,
                        py,
                        &prep.splats,
                        list.iter().copied(),
                        cutoff_sq,
                        bg,
                    );
                }
            }
        }
    });
    Image::new(w, h, data)
}

fn tile_range(b: &[i32; 4], ts: usize) -> (usize, usize, usize, usize) {
    (
        b[0] as usize / ts,
        b[1] as usize / ts,
        b[2] as usize / ts,
        b[3] as usize / ts,
    )
}

/// Brute-force renderer: every pixel walks the whole depth-sorted splat list.
pub fn render_reference(
    cloud: &GaussianCloud,
    camera: &Camera,
    config: &RenderConfig,
) -> Result<Image> {
    let prep = prepare(cloud, camera, config)?;
    let (w, h) = (config.width, config.height);
    let cutoff_sq = (config.cutoff * config.cutoff) as f32;
    let bg = config.background;
    let n = prep.splats.len() as u32;
    let mut data = vec![bg; w * h];
    exec::for_each_chunk_mut(&mut data, w, |y, row| {
        for (x, px) in row.iter_mut().enumerate() {
            *px = composite(x as f32, y as f32, &prep.splats, 0..n, cutoff_sq, bg);
        }
    });
    Image::new(w, h, data)
}

/// A rendering function `R(G, E, K)`.
pub trait Renderer: Sync {
    fn render(
        &self,
        cloud: &GaussianCloud,
        camera: &Camera,
        config: &RenderConfig,
    ) -> Result<Image>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RendererKind {
    #[default]
    Tiled,
    Reference,
}

impl Renderer for RendererKind {
    fn render(
        &self,
        cloud: &GaussianCloud,
        camera: &Camera,
        config: &RenderConfig,
    ) -> Result<Image> {
        match self {
            RendererKind::Tiled => render(cloud, camera, config),
            RendererKind::Reference => render_reference(cloud, camera, config),
        }
    }
}
