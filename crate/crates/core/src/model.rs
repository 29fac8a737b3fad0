//! Shared data model: pixel-aligned Gaussian frames, flattened clouds,
//! cameras, motion and flow rasters, and images.
//!
//! Attribute payloads are `f32`. Camera parameters are `f64` so that gauge
//! arithmetic stays exact to machine precision.

use crate::error::{Error, Result};
use crate::math::{self, Quat};
use nalgebra::{Matrix3, Vector3};

/// Tolerance on quaternion unit norm.
pub const UNIT_TOLERANCE: f64 = 1e-6;

const IDENTITY_QUAT: [f32; 4] = [1.0, 0.0, 0.0, 0.0];

/// Attribute maps of one view at one timestamp, stored per pixel in raster
/// order (`index = y * width + x`).
#[derive(Debug, Clone, PartialEq)]
pub struct ViewMaps {
    pub positions: Vec<[f32; 3]>,
    pub opacities: Vec<f32>,
    pub colors: Vec<[f32; 3]>,
    /// Rotation quaternions `[w, x, y, z]`.
    pub rotations: Vec<[f32; 4]>,
    pub scales: Vec<[f32; 3]>,
    /// Foreground mask: only `true` pixels carry a Gaussian.
    pub valid: Vec<bool>,
}

impl ViewMaps {
    /// Maps of `pixels` entries, all invalid, with benign defaults.
    pub fn empty(pixels: usize) -> Self {
        Self {
            positions: vec![[0.0; 3]; pixels],
            opacities: vec![0.0; pixels],
            colors: vec![[0.0; 3]; pixels],
            rotations: vec![IDENTITY_QUAT; pixels],
            scales: vec![[1.0; 3]; pixels],
            valid: vec![false; pixels],
        }
    }

    pub fn pixel_count(&self) -> usize {
        self.positions.len()
    }

    pub fn valid_count(&self) -> usize {
        self.valid.iter().filter(|v| **v).count()
    }

    pub fn gaussian(&self, pixel: usize) -> Gaussian {
        Gaussian {
            position: self.positions[pixel],
            opacity: self.opacities[pixel],
            color: self.colors[pixel],
            rotation: self.rotations[pixel],
            scale: self.scales[pixel],
        }
    }

    pub fn set_gaussian(&mut self, pixel: usize, g: &Gaussian) {
        self.positions[pixel] = g.position;
        self.opacities[pixel] = g.opacity;
        self.colors[pixel] = g.color;
        self.rotations[pixel] = g.rotation;
        self.scales[pixel] = g.scale;
        self.valid[pixel] = true;
    }

    fn check_lengths(&self, pixels: usize, view: usize) -> Result<()> {
        let lens = [
            ("P", self.positions.len()),
            ("O", self.opacities.len()),
            ("C", self.colors.len()),
            ("Q", self.rotations.len()),
            ("S", self.scales.len()),
            ("valid_mask", self.valid.len()),
        ];
        for (name, len) in lens {
            if len != pixels {
                return Err(Error::ShapeMismatch(format!(
                    "view {view}: map {name} has {len} entries, expected {pixels}"
                )));
            }
        }
        Ok(())
    }
}

/// One Gaussian's attributes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gaussian {
    pub position: [f32; 3],
    pub opacity: f32,
    pub color: [f32; 3],
    pub rotation: [f32; 4],
    pub scale: [f32; 3],
}

impl Gaussian {
    pub fn validate(&self, location: &str) -> Result<()> {
        let finite = self.position.iter().all(|v| v.is_finite())
            && self.opacity.is_finite()
            && self.color.iter().all(|v| v.is_finite())
            && self.rotation.iter().all(|v| v.is_finite())
            && self.scale.iter().all(|v| v.is_finite());
        if !finite {
            return Err(Error::NonFiniteValue(location.to_string()));
        }
        if !(0.0..=1.0).contains(&self.opacity) {
            return Err(Error::OpacityOutOfRange {
                value: self.opacity,
                location: location.to_string(),
            });
        }
        if self.scale.iter().any(|s| *s <= 0.0) {
            return Err(Error::InvalidAttribute(format!(
                "non-positive scale {:?} at {location}",
                self.scale
            )));
        }
        let n = quat_norm_f32(&self.rotation);
        if (n - 1.0).abs() > UNIT_TOLERANCE {
            return Err(Error::InvalidAttribute(format!(
                "rotation norm {n} at {location}"
            )));
        }
        Ok(())
    }
}

fn quat_norm_f32(q: &[f32; 4]) -> f64 {
    math::quat_norm(&[q[0] as f64, q[1] as f64, q[2] as f64, q[3] as f64])
}

/// Brings a quaternion to unit norm. Quaternions already within tolerance are
/// returned untouched, so normalization is idempotent bit for bit.
pub fn normalize_quat(q: [f32; 4]) -> Option<[f32; 4]> {
    let n = quat_norm_f32(&q);
    if !(n > 0.0) || !n.is_finite() {
        return None;
    }
    if (n - 1.0).abs() <= UNIT_TOLERANCE {
        return Some(q);
    }
    Some([
        (q[0] as f64 / n) as f32,
        (q[1] as f64 / n) as f32,
        (q[2] as f64 / n) as f32,
        (q[3] as f64 / n) as f32,
    ])
}

/// Pixel-aligned Gaussians of all views at one timestamp.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianFrame {
    width: usize,
    height: usize,
    timestamp: i64,
    views: Vec<ViewMaps>,
}

impl GaussianFrame {
    /// Validates and normalizes per-view maps.
    ///
    /// Every entry must be finite. Valid pixels must have opacity in `[0, 1]`,
    /// strictly positive scales and a non-zero quaternion; quaternions are
    /// renormalized. Zero quaternions on background pixels become identity.
    pub fn new(
        width: usize,
        height: usize,
        timestamp: i64,
        mut views: Vec<ViewMaps>,
    ) -> Result<Self> {
        let pixels = width
            .checked_mul(height)
            .ok_or_else(|| Error::ShapeMismatch("map size overflows".into()))?;
        for (vi, view) in views.iter_mut().enumerate() {
            view.check_lengths(pixels, vi)?;
            for p in 0..pixels {
                let loc = || format!("view {vi}, pixel {p}");
                let g = view.gaussian(p);
                let finite = g.position.iter().all(|v| v.is_finite())
                    && g.opacity.is_finite()
                    && g.color.iter().all(|v| v.is_finite())
                    && g.rotation.iter().all(|v| v.is_finite())
                    && g.scale.iter().all(|v| v.is_finite());
                if !finite {
                    return Err(Error::NonFiniteValue(loc()));
                }
                if view.valid[p] {
                    if !(0.0..=1.0).contains(&g.opacity) {
                        return Err(Error::OpacityOutOfRange {
                            value: g.opacity,
                            location: loc(),
                        });
                    }
                    if g.scale.iter().any(|s| *s <= 0.0) {
                        return Err(Error::InvalidAttribute(format!(
                            "non-positive scale at {}",
                            loc()
                        )));
                    }
                    view.rotations[p] = normalize_quat(g.rotation).ok_or_else(|| {
                        Error::InvalidAttribute(format!("zero quaternion at {}", loc()))
                    })?;
                } else {
                    view.rotations[p] = normalize_quat(g.rotation).unwrap_or(IDENTITY_QUAT);
                }
            }
        }
        Ok(Self {
            width,
            height,
            timestamp,
            views,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }

    pub fn timestamp(&self) -> i64 {
        self.timestamp
    }

    pub fn views(&self) -> &[ViewMaps] {
        &self.views
    }

    pub fn view(&self, i: usize) -> &ViewMaps {
        &self.views[i]
    }

    pub fn view_count(&self) -> usize {
        self.views.len()
    }

    pub fn valid_count(&self) -> usize {
        self.views.iter().map(ViewMaps::valid_count).sum()
    }

    pub fn into_views(self) -> Vec<ViewMaps> {
        self.views
    }

    /// Same maps, positions replaced by `f(view, pixel, old)`. Used by the
    /// warping operations; results are revalidated for finiteness.
    pub(crate) fn map_positions<F>(&self, timestamp: i64, f: F) -> Result<Self>
    where
        F: Fn(usize, usize, [f32; 3]) -> [f32; 3] + Sync + Send,
    {
        let mut views = self.views.clone();
        for (vi, view) in views.iter_mut().enumerate() {
            for (p, pos) in view.positions.iter_mut().enumerate() {
                let np = f(vi, p, *pos);
                if np.iter().any(|v| !v.is_finite()) {
                    return Err(Error::NonFiniteValue(format!(
                        "warped position view {vi}, pixel {p}"
                    )));
                }
                *pos = np;
            }
        }
        Ok(Self {
            width: self.width,
            height: self.height,
            timestamp,
            views,
        })
    }

    /// Flattens the valid pixels of every view into a render-ready cloud.
    pub fn flatten(&self) -> GaussianCloud {
        flatten(self)
    }
}

/// Identifies where a flattened Gaussian came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SourceTag {
    pub timestamp: i64,
    pub view: u32,
    pub pixel: u32,
}

/// Flat, render-ready Gaussians.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct GaussianCloud {
    positions: Vec<[f32; 3]>,
    opacities: Vec<f32>,
    colors: Vec<[f32; 3]>,
    rotations: Vec<[f32; 4]>,
    scales: Vec<[f32; 3]>,
    sources: Vec<SourceTag>,
}

impl GaussianCloud {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_capacity(n: usize) -> Self {
        Self {
            positions: Vec::with_capacity(n),
            opacities: Vec::with_capacity(n),
            colors: Vec::with_capacity(n),
            rotations: Vec::with_capacity(n),
            scales: Vec::with_capacity(n),
            sources: Vec::with_capacity(n),
        }
    }

    /// Builds a cloud from individual Gaussians, validating each and
    /// renormalizing quaternions.
    pub fn from_gaussians<I>(items: I) -> Result<Self>
    where
        I: IntoIterator<Item = (Gaussian, SourceTag)>,
    {
        let mut cloud = Self::new();
        for (i, (mut g, tag)) in items.into_iter().enumerate() {
            g.rotation = normalize_quat(g.rotation).ok_or_else(|| {
                Error::InvalidAttribute(format!("zero quaternion at gaussian {i}"))
            })?;
            g.validate(&format!("gaussian {i}"))?;
            cloud.push_unchecked(g, tag);
        }
        Ok(cloud)
    }

    pub(crate) fn push_unchecked(&mut self, g: Gaussian, tag: SourceTag) {
        self.positions.push(g.position);
        self.opacities.push(g.opacity);
        self.colors.push(g.color);
        self.rotations.push(g.rotation);
        self.scales.push(g.scale);
        self.sources.push(tag);
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn positions(&self) -> &[[f32; 3]] {
        &self.positions
    }

    pub fn opacities(&self) -> &[f32] {
        &self.opacities
    }

    pub fn colors(&self) -> &[[f32; 3]] {
        &self.colors
    }

    pub fn rotations(&self) -> &[[f32; 4]] {
        &self.rotations
    }

    pub fn scales(&self) -> &[[f32; 3]] {
        &self.scales
    }

    pub fn sources(&self) -> &[SourceTag] {
        &self.sources
    }

    pub fn get(&self, i: usize) -> Gaussian {
        Gaussian {
            position: self.positions[i],
            opacity: self.opacities[i],
            color: self.colors[i],
            rotation: self.rotations[i],
            scale: self.scales[i],
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (Gaussian, SourceTag)> + '_ {
        (0..self.len()).map(move |i| (self.get(i), self.sources[i]))
    }

    pub fn extend_from(&mut self, other: &GaussianCloud) {
        self.positions.extend_from_slice(&other.positions);
        self.opacities.extend_from_slice(&other.opacities);
        self.colors.extend_from_slice(&other.colors);
        self.rotations.extend_from_slice(&other.rotations);
        self.scales.extend_from_slice(&other.scales);
        self.sources.extend_from_slice(&other.sources);
    }

    /// Concatenation in argument order.
    pub fn concat(parts: &[&GaussianCloud]) -> GaussianCloud {
        let n = parts.iter().map(|c| c.len()).sum();
        let mut out = GaussianCloud::with_capacity(n);
        for p in parts {
            out.extend_from(p);
        }
        out
    }

    /// Scatters the cloud back onto `views` pixel grids of `width x height`
    /// using the source tags. Pixels not referenced stay invalid.
    pub fn group_by_source(
        &self,
        width: usize,
        height: usize,
        views: usize,
        timestamp: i64,
    ) -> Result<GaussianFrame> {
        let pixels = width * height;
        let mut maps: Vec<ViewMaps> = (0..views).map(|_| ViewMaps::empty(pixels)).collect();
        for (g, tag) in self.iter() {
            let (v, p) = (tag.view as usize, tag.pixel as usize);
            if v >= views || p >= pixels {
                return Err(Error::ShapeMismatch(format!(
                    "source tag {tag:?} outside {views} views of {width}x{height}"
                )));
            }
            maps[v].set_gaussian(p, &g);
        }
        GaussianFrame::new(width, height, timestamp, maps)
    }
}

/// One Gaussian per valid-mask pixel per view, in (view, pixel) order.
pub fn flatten(frame: &GaussianFrame) -> GaussianCloud {
    let mut cloud = GaussianCloud::with_capacity(frame.valid_count());
    for (vi, view) in frame.views.iter().enumerate() {
        for p in 0..view.pixel_count() {
            if view.valid[p] {
                cloud.push_unchecked(
                    view.gaussian(p),
                    SourceTag {
                        timestamp: frame.timestamp,
                        view: vi as u32,
                        pixel: p as u32,
                    },
                );
            }
        }
    }
    cloud
}

/// Pinhole intrinsics in pixels. Pixel centers sit at integer coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Intrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
}

impl Intrinsics {
    pub fn matrix(&self) -> Matrix3<f64> {
        Matrix3::new(self.fx, 0.0, self.cx, 0.0, self.fy, self.cy, 0.0, 0.0, 1.0)
    }
}

/// World-to-camera pose plus intrinsics: `x_cam = R(q) x_world + T`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Camera {
    rotation: Quat,
    translation: [f64; 3],
    intrinsics: Intrinsics,
}

impl Camera {
    pub fn new(rotation: Quat, translation: [f64; 3], intrinsics: Intrinsics) -> Result<Self> {
        if rotation
            .iter()
            .chain(translation.iter())
            .any(|v| !v.is_finite())
        {
            return Err(Error::NonFiniteValue("camera pose".into()));
        }
        let n = math::quat_norm(&rotation);
        if (n - 1.0).abs() > UNIT_TOLERANCE {
            return Err(Error::InvalidCamera(format!("rotation norm {n}")));
        }
        let k = intrinsics;
        if ![k.fx, k.fy, k.cx, k.cy].iter().all(|v| v.is_finite()) || !(k.fx > 0.0 && k.fy > 0.0) {
            return Err(Error::InvalidCamera(format!("intrinsics {k:?}")));
        }
        Ok(Self {
            rotation,
            translation,
            intrinsics,
        })
    }

    /// Identity pose: the reference camera of a set.
    pub fn reference(intrinsics: Intrinsics) -> Result<Self> {
        Self::new([1.0, 0.0, 0.0, 0.0], [0.0; 3], intrinsics)
    }

    pub fn rotation(&self) -> Quat {
        self.rotation
    }

    pub fn translation(&self) -> [f64; 3] {
        self.translation
    }

    pub fn translation_vector(&self) -> Vector3<f64> {
        Vector3::from(self.translation)
    }

    pub fn intrinsics(&self) -> Intrinsics {
        self.intrinsics
    }

    pub fn rotation_matrix(&self) -> Matrix3<f64> {
        math::quat_to_matrix(&self.rotation)
    }

    pub fn world_to_camera(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation_matrix() * p + self.translation_vector()
    }

    /// Camera center in world coordinates.
    pub fn center(&self) -> Vector3<f64> {
        -(self.rotation_matrix().transpose() * self.translation_vector())
    }

    /// Pinhole projection of a camera-space point; `None` behind the camera.
    pub fn project_camera_point(&self, c: &Vector3<f64>) -> Option<[f64; 2]> {
        if c.z <= 0.0 {
            return None;
        }
        let k = &self.intrinsics;
        Some([k.fx * c.x / c.z + k.cx, k.fy * c.y / c.z + k.cy])
    }

    pub fn project(&self, p: &Vector3<f64>) -> Option<[f64; 2]> {
        self.project_camera_point(&self.world_to_camera(p))
    }

    /// Same rotation and intrinsics, translation multiplied by `s`.
    pub fn with_translation_scaled(&self, s: f64) -> Self {
        let t = self.translation;
        Self {
            translation: [t[0] * s, t[1] * s, t[2] * s],
            ..*self
        }
    }

    /// Intrinsics for a raster resampled by factor `d` (pixel centers stay at
    /// integer coordinates).
    pub fn with_resolution_scaled(&self, d: f64) -> Self {
        let k = self.intrinsics;
        Self {
            intrinsics: Intrinsics {
                fx: k.fx * d,
                fy: k.fy * d,
                cx: (k.cx + 0.5) * d - 0.5,
                cy: (k.cy + 0.5) * d - 0.5,
            },
            ..*self
        }
    }
}

/// The cameras of one timestamp; index 0 is the coordinate reference.
pub type CameraSet = Vec<Camera>;

fn check_raster<T>(width: usize, height: usize, data: &[T], what: &str) -> Result<()> {
    if data.len() != width * height {
        return Err(Error::ShapeMismatch(format!(
            "{what}: {} entries for {width}x{height}",
            data.len()
        )));
    }
    Ok(())
}

/// Backward (toward t-1) and forward (toward t+1) 3D motion of each pixel's
/// Gaussian for one view, as full inter-frame displacements.
#[derive(Debug, Clone, PartialEq)]
pub struct MotionField {
    width: usize,
    height: usize,
    view: u32,
    timestamp: i64,
    backward: Vec<[f32; 3]>,
    forward: Vec<[f32; 3]>,
}

impl MotionField {
    pub fn new(
        width: usize,
        height: usize,
        view: u32,
        timestamp: i64,
        backward: Vec<[f32; 3]>,
        forward: Vec<[f32; 3]>,
    ) -> Result<Self> {
        check_raster(width, height, &backward, "backward motion")?;
        check_raster(width, height, &forward, "forward motion")?;
        if backward
            .iter()
            .chain(forward.iter())
            .flatten()
            .any(|v| !v.is_finite())
        {
            return Err(Error::NonFiniteValue(format!("motion of view {view}")));
        }
        Ok(Self {
            width,
            height,
            view,
            timestamp,
            backward,
            forward,
        })
    }

    pub fn zeros(width: usize, height: usize, view: u32, timestamp: i64) -> Self {
        let n = width * height;
        Self {
            width,
            height,
            view,
            timestamp,
            backward: vec![[0.0; 3]; n],
            forward: vec![[0.0; 3]; n],
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn view(&self) -> u32 {
        self.view
    }

    pub fn timestamp(&self) -> i64 {
        self.timestamp
    }

    pub fn backward(&self) -> &[[f32; 3]] {
        &self.backward
    }

    pub fn forward(&self) -> &[[f32; 3]] {
        &self.forward
    }

    pub fn direction(&self, d: Direction) -> &[[f32; 3]] {
        match d {
            Direction::Backward => &self.backward,
            Direction::Forward => &self.forward,
        }
    }
}

/// Which motion map to follow: toward t-1 or toward t+1.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Backward,
    Forward,
}

impl Direction {
    pub fn step(self) -> i64 {
        match self {
            Direction::Backward => -1,
            Direction::Forward => 1,
        }
    }
}

/// Per-pixel 2D displacement in pixels. `valid` is false where the flow is
/// undefined (no Gaussian, or the displaced point is behind the camera).
#[derive(Debug, Clone, PartialEq)]
pub struct FlowField {
    width: usize,
    height: usize,
    flow: Vec<[f32; 2]>,
    valid: Vec<bool>,
}

impl FlowField {
    pub fn new(width: usize, height: usize, flow: Vec<[f32; 2]>, valid: Vec<bool>) -> Result<Self> {
        check_raster(width, height, &flow, "flow")?;
        check_raster(width, height, &valid, "flow mask")?;
        if flow.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteValue("flow".into()));
        }
        Ok(Self {
            width,
            height,
            flow,
            valid,
        })
    }

    /// Every pixel valid.
    pub fn dense(width: usize, height: usize, flow: Vec<[f32; 2]>) -> Result<Self> {
        let n = flow.len();
        Self::new(width, height, flow, vec![true; n])
    }

    pub fn uniform(width: usize, height: usize, v: [f32; 2]) -> Result<Self> {
        Self::dense(width, height, vec![v; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn flow(&self) -> &[[f32; 2]] {
        &self.flow
    }

    pub fn valid(&self) -> &[bool] {
        &self.valid
    }
}

/// Per-pixel weights in `[0, 1]`; zero marks out-of-bounds or undefined.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightMap {
    width: usize,
    height: usize,
    weights: Vec<f32>,
}

impl WeightMap {
    pub fn new(width: usize, height: usize, weights: Vec<f32>) -> Result<Self> {
        check_raster(width, height, &weights, "weights")?;
        if let Some(w) = weights.iter().find(|w| !(0.0..=1.0).contains(*w)) {
            return Err(Error::InvalidAttribute(format!(
                "weight {w} outside [0, 1]"
            )));
        }
        Ok(Self {
            width,
            height,
            weights,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn weights(&self) -> &[f32] {
        &self.weights
    }
}

/// RGB image, values nominally in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    width: usize,
    height: usize,
    data: Vec<[f32; 3]>,
}

impl Image {
    pub fn new(width: usize, height: usize, data: Vec<[f32; 3]>) -> Result<Self> {
        check_raster(width, height, &data, "image")?;
        if data.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteValue("image".into()));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, color: [f32; 3]) -> Self {
        Self {
            width,
            height,
            data: vec![color; width * height],
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[[f32; 3]] {
        &self.data
    }

    pub fn pixel(&self, x: usize, y: usize) -> [f32; 3] {
        self.data[y * self.width + x]
    }

    pub fn into_data(self) -> Vec<[f32; 3]> {
        self.data
    }

    pub fn same_shape(&self, other: &Image) -> bool {
        self.width == other.width && self.height == other.height
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn solid_view(pixels: usize) -> ViewMaps {
        ViewMaps {
            positions: (0..pixels).map(|i| [i as f32, 0.5, 2.0]).collect(),
            opacities: vec![0.7; pixels],
            colors: vec![[0.2, 0.4, 0.6]; pixels],
            rotations: vec![[1.0, 0.0, 0.0, 0.0]; pixels],
            scales: vec![[0.1; 3]; pixels],
            valid: vec![true; pixels],
        }
    }

    #[test]
    fn four_views_of_8x8() {
        let views = (0..4).map(|_| solid_view(64)).collect();
        let f = GaussianFrame::new(8, 8, 3, views).unwrap();
        assert_eq!(f.view_count(), 4);
        assert_eq!((f.width(), f.height()), (8, 8));
        assert_eq!(f.timestamp(), 3);
    }

    #[test]
    fn opacity_above_one_rejected() {
        let mut v = solid_view(64);
        v.opacities[5] = 1.5;
        let err = GaussianFrame::new(8, 8, 0, vec![v]).unwrap_err();
        assert!(matches!(err, Error::OpacityOutOfRange { .. }));
    }

    #[test]
    fn quaternion_renormalized() {
        let mut v = solid_view(64);
        v.rotations[9] = [2.0, 0.0, 0.0, 0.0];
        let f = GaussianFrame::new(8, 8, 0, vec![v]).unwrap();
        assert_eq!(f.view(0).rotations[9], [1.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn non_finite_and_shape_errors() {
        let mut v = solid_view(64);
        v.positions[0][1] = f32::NAN;
        assert!(matches!(
            GaussianFrame::new(8, 8, 0, vec![v]),
            Err(Error::NonFiniteValue(_))
        ));
        let mut v = solid_view(64);
        v.colors.pop();
        assert!(matches!(
            GaussianFrame::new(8, 8, 0, vec![v]),
            Err(Error::ShapeMismatch(_))
        ));
    }

    #[test]
    fn background_pixels_are_unconstrained_but_finite() {
        let mut v = solid_view(4);
        v.valid[1] = false;
        v.scales[1] = [0.0; 3];
        v.rotations[1] = [0.0; 4];
        v.opacities[1] = 0.0;
        let f = GaussianFrame::new(2, 2, 0, vec![v]).unwrap();
        assert_eq!(f.view(0).rotations[1], [1.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn flatten_counts() {
        let mut a = solid_view(16);
        let mut b = solid_view(16);
        for p in 3..16 {
            a.valid[p] = false;
            b.valid[p] = false;
        }
        let f = GaussianFrame::new(4, 4, 0, vec![a, b]).unwrap();
        assert_eq!(flatten(&f).len(), 6);

        let mut e = solid_view(16);
        e.valid = vec![false; 16];
        let f = GaussianFrame::new(4, 4, 0, vec![e]).unwrap();
        assert!(flatten(&f).is_empty());
    }

    #[test]
    fn flatten_group_round_trip() {
        let mut a = solid_view(16);
        a.valid[2] = false;
        a.valid[7] = false;
        let f = GaussianFrame::new(4, 4, 5, vec![a.clone(), solid_view(16)]).unwrap();
        let back = flatten(&f).group_by_source(4, 4, 2, 5).unwrap();
        for (va, vb) in f.views().iter().zip(back.views()) {
            assert_eq!(va.valid, vb.valid);
            for p in 0..16 {
                if va.valid[p] {
                    assert_eq!(va.gaussian(p), vb.gaussian(p));
                }
            }
        }
    }

    #[test]
    fn camera_rejects_bad_quaternion() {
        let k = Intrinsics {
            fx: 100.0,
            fy: 100.0,
            cx: 32.0,
            cy: 32.0,
        };
        assert!(Camera::new([1.1, 0.0, 0.0, 0.0], [0.0; 3], k).is_err());
        assert!(Camera::new([1.0, 0.0, 0.0, 0.0], [0.0; 3], Intrinsics { fx: 0.0, ..k }).is_err());
        let c = Camera::reference(k).unwrap();
        assert_eq!(c.project(&Vector3::new(0.0, 0.0, 2.0)), Some([32.0, 32.0]));
    }

    #[test]
    fn resolution_scaling_keeps_image_center() {
        let k = Intrinsics {
            fx: 100.0,
            fy: 100.0,
            cx: 31.5,
            cy: 31.5,
        };
        let c = Camera::reference(k).unwrap().with_resolution_scaled(2.0);
        assert_eq!(c.intrinsics().cx, 63.5);
        assert_eq!(c.intrinsics().fx, 200.0);
    }
}
