//! Dense 3D motion: retargeting, constant-velocity warping, scene-flow
//! projection, cyclic-consistency weights and the motion self-supervision
//! losses.

use crate::error::{Error, Result};
use crate::exec;
use crate::math::v3;
use crate::metrics::{mse, ssim};
use crate::model::{
    Camera, Direction, FlowField, GaussianCloud, GaussianFrame, Image, MotionField, WeightMap,
};
use crate::render::{RenderConfig, Renderer};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossWeights {
    pub ssim: f64,
    pub lpips: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            ssim: 0.25,
            lpips: 0.25,
        }
    }
}

/// External perceptual distance (e.g. a learned metric). Without one the
/// perceptual term is zero.
pub trait PerceptualScorer: Sync {
    fn distance(&self, a: &Image, b: &Image) -> Result<f64>;
}

#[derive(Clone, Copy, Default)]
pub struct LossSettings<'a> {
    pub weights: LossWeights,
    pub scorer: Option<&'a dyn PerceptualScorer>,
}

/// How `μ_bwd` is sampled at the forward-displaced position.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Lookup {
    #[default]
    Nearest,
    Bilinear,
}

/// `r = a·‖μ‖ + b`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowConsistencyParams {
    pub a: f64,
    pub b: f64,
    pub lookup: Lookup,
}

impl Default for FlowConsistencyParams {
    fn default() -> Self {
        Self {
            a: 0.1,
            b: 0.5,
            lookup: Lookup::Nearest,
        }
    }
}

impl FlowConsistencyParams {
    fn validate(&self) -> Result<()> {
        if !(self.a >= 0.0) || !(self.b > 0.0) || !self.a.is_finite() || !self.b.is_finite() {
            return Err(Error::InvalidAttribute(format!(
                "flow consistency coefficients a={}, b={}",
                self.a, self.b
            )));
        }
        Ok(())
    }
}

/// Photometric terms for one view. `dssim` is `1 - SSIM`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LossTerms {
    pub l2: f64,
    pub dssim: f64,
    pub lpips: f64,
    pub total: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct LossReport {
    pub per_view: Vec<LossTerms>,
    pub l2: f64,
    pub dssim: f64,
    pub lpips: f64,
    pub total: f64,
}

pub(crate) fn check_motions(frame: &GaussianFrame, motions: &[MotionField]) -> Result<()> {
    if motions.len() != frame.view_count() {
        return Err(Error::ShapeMismatch(format!(
            "{} motion fields for {} views",
            motions.len(),
            frame.view_count()
        )));
    }
    for (i, m) in motions.iter().enumerate() {
        if m.width() != frame.width() || m.height() != frame.height() {
            return Err(Error::ShapeMismatch(format!(
                "motion {i} is {}x{}, frame is {}x{}",
                m.width(),
                m.height(),
                frame.width(),
                frame.height()
            )));
        }
    }
    Ok(())
}

/// Positions moved by `frac` times the chosen motion; other attributes kept.
/// `frac == 0` copies positions bit for bit.
pub fn warp_frame(
    frame: &GaussianFrame,
    motions: &[MotionField],
    direction: Direction,
    frac: f64,
    timestamp: i64,
) -> Result<GaussianFrame> {
    check_motions(frame, motions)?;
    if frac == 0.0 {
        return frame.map_positions(timestamp, |_, _, p| p);
    }
    frame.map_positions(timestamp, |v, p, pos| {
        let m = motions[v].direction(direction)[p];
        std::array::from_fn(|k| (pos[k] as f64 + frac * m[k] as f64) as f32)
    })
}

/// `P ← P + M_1` (backward) or `P + M_2` (forward).
pub fn retarget(
    frame: &GaussianFrame,
    motions: &[MotionField],
    direction: Direction,
) -> Result<GaussianFrame> {
    warp_frame(
        frame,
        motions,
        direction,
        1.0,
        frame.timestamp() + direction.step(),
    )
}

pub(crate) fn check_adjacent(frame_t: &GaussianFrame, frame_tm1: &GaussianFrame) -> Result<()> {
    if frame_tm1.timestamp() + 1 != frame_t.timestamp() {
        return Err(Error::NonAdjacentFrames {
            t: frame_t.timestamp(),
            prev: frame_tm1.timestamp(),
        });
    }
    if frame_t.width() != frame_tm1.width()
        || frame_t.height() != frame_tm1.height()
        || frame_t.view_count() != frame_tm1.view_count()
    {
        return Err(Error::ShapeMismatch(
            "adjacent frames differ in shape".into(),
        ));
    }
    Ok(())
}

/// Fractions `(t - t', t' - (t-1))` after range checking.
pub fn time_fractions(t: i64, t_prime: f64) -> Result<(f64, f64)> {
    let (lo, hi) = ((t - 1) as f64, t as f64);
    if !(t_prime >= lo && t_prime <= hi) {
        return Err(Error::TimeOutOfRange { t_prime, lo, hi });
    }
    Ok((hi - t_prime, t_prime - lo))
}

/// Both frames warped to `t'` as pixel-aligned frames.
pub fn warp_frames_to_time(
    frame_t: &GaussianFrame,
    frame_tm1: &GaussianFrame,
    motions_t: &[MotionField],
    motions_tm1: &[MotionField],
    t_prime: f64,
) -> Result<(GaussianFrame, GaussianFrame)> {
    check_adjacent(frame_t, frame_tm1)?;
    let (ft, fp) = time_fractions(frame_t.timestamp(), t_prime)?;
    let a = warp_frame(
        frame_t,
        motions_t,
        Direction::Backward,
        ft,
        frame_t.timestamp(),
    )?;
    let b = warp_frame(
        frame_tm1,
        motions_tm1,
        Direction::Forward,
        fp,
        frame_tm1.timestamp(),
    )?;
    Ok((a, b))
}

/// Constant-velocity warp of both adjacent frames to `t' ∈ [t-1, t]`:
/// `P_t + (t - t')·M_1` and `P_{t-1} + (t' - t + 1)·M_2`.
pub fn warp_to_time(
    frame_t: &GaussianFrame,
    frame_tm1: &GaussianFrame,
    motions_t: &[MotionField],
    motions_tm1: &[MotionField],
    t_prime: f64,
) -> Result<(GaussianCloud, GaussianCloud)> {
    let (a, b) = warp_frames_to_time(frame_t, frame_tm1, motions_t, motions_tm1, t_prime)?;
    Ok((a.flatten(), b.flatten()))
}

/// `μ̂(p) = π(P(p) + M(p)) - π(P(p))` for the view `motion.view()`. Pixels
/// without a Gaussian or with an endpoint behind the camera are invalid.
pub fn project_scene_flow(
    frame: &GaussianFrame,
    motion: &MotionField,
    direction: Direction,
    camera: &Camera,
) -> Result<FlowField> {
    let v = motion.view() as usize;
    if v >= frame.view_count() {
        return Err(Error::ShapeMismatch(format!(
            "motion view {v} but frame has {} views",
            frame.view_count()
        )));
    }
    check_motions_one(frame, motion)?;
    let maps = frame.view(v);
    let m = motion.direction(direction);
    let out = exec::map_range(frame.pixel_count(), |p| {
        if !maps.valid[p] {
            return None;
        }
        let x = v3(maps.positions[p]);
        let a = camera.project(&x)?;
        let b = camera.project(&(x + v3(m[p])))?;
        Some([(b[0] - a[0]) as f32, (b[1] - a[1]) as f32])
    });
    let valid = out.iter().map(Option::is_some).collect();
    let flow = out.into_iter().map(|f| f.unwrap_or([0.0; 2])).collect();
    FlowField::new(frame.width(), frame.height(), flow, valid)
}

fn check_motions_one(frame: &GaussianFrame, m: &MotionField) -> Result<()> {
    if m.width() != frame.width() || m.height() != frame.height() {
        return Err(Error::ShapeMismatch(
            "motion field and frame differ in shape".into(),
        ));
    }
    Ok(())
}

fn check_flows(a: &FlowField, b: &FlowField) -> Result<()> {
    if a.width() != b.width() || a.height() != b.height() {
        return Err(Error::ShapeMismatch(format!(
            "flows {}x{} and {}x{}",
            a.width(),
            a.height(),
            b.width(),
            b.height()
        )));
    }
    Ok(())
}

/// Round half away from zero to a pixel index, `None` when outside the grid.
pub(crate) fn pixel_at(x: f64, y: f64, w: usize, h: usize) -> Option<usize> {
    let (xi, yi) = (x.round(), y.round());
    if xi < 0.0
        || yi < 0.0
        || xi > (w - 1) as f64
        || yi > (h - 1) as f64
        || !xi.is_finite()
        || !yi.is_finite()
    {
        return None;
    }
    Some(yi as usize * w + xi as usize)
}

fn sample_flow(f: &FlowField, x: f64, y: f64, lookup: Lookup) -> Option<[f64; 2]> {
    let (w, h) = (f.width(), f.height());
    match lookup {
        Lookup::Nearest => {
            let i = pixel_at(x, y, w, h)?;
            f.valid()[i].then(|| f.flow()[i].map(|c| c as f64))
        }
        Lookup::Bilinear => {
            let (x0, y0) = (x.floor(), y.floor());
            let (fx, fy) = (x - x0, y - y0);
            let mut acc = [0.0; 2];
            for (dx, dy, wgt) in [
                (0.0, 0.0, (1.0 - fx) * (1.0 - fy)),
                (1.0, 0.0, fx * (1.0 - fy)),
                (0.0, 1.0, (1.0 - fx) * fy),
                (1.0, 1.0, fx * fy),
            ] {
                if wgt == 0.0 {
                    continue;
                }
                let (sx, sy) = (x0 + dx, y0 + dy);
                if sx < 0.0 || sy < 0.0 || sx > (w - 1) as f64 || sy > (h - 1) as f64 {
                    return None;
                }
                let i = sy as usize * w + sx as usize;
                if !f.valid()[i] {
                    return None;
                }
                acc[0] += wgt * f.flow()[i][0] as f64;
                acc[1] += wgt * f.flow()[i][1] as f64;
            }
            Some(acc)
        }
    }
}

/// `w(p) = exp(-r·‖μ_fwd(p) + μ_bwd[p + μ_fwd(p)]‖)`, `r = a·‖μ_fwd(p)‖ + b`.
/// Zero where the lookup leaves the image or hits an invalid flow.
pub fn cyclic_weight(
    fwd: &FlowField,
    bwd: &FlowField,
    params: &FlowConsistencyParams,
) -> Result<WeightMap> {
    check_flows(fwd, bwd)?;
    params.validate()?;
    let w = fwd.width();
    let weights = exec::map_range(w * fwd.height(), |p| {
        if !fwd.valid()[p] {
            return 0.0f32;
        }
        let mf = fwd.flow()[p].map(|c| c as f64);
        let (x, y) = ((p % w) as f64 + mf[0], (p / w) as f64 + mf[1]);
        let Some(mb) = sample_flow(bwd, x, y, params.lookup) else {
            return 0.0;
        };
        let res = ((mf[0] + mb[0]).powi(2) + (mf[1] + mb[1]).powi(2)).sqrt();
        let r = params.a * (mf[0] * mf[0] + mf[1] * mf[1]).sqrt() + params.b;
        (-r * res).exp() as f32
    });
    WeightMap::new(w, fwd.height(), weights)
}

/// `Σ_p w(p)·‖μ_pseudo(p) - μ̂(p)‖` over pixels where both flows are valid.
pub fn flow_loss_weighted(
    pred: &FlowField,
    pseudo: &FlowField,
    weights: &WeightMap,
) -> Result<f64> {
    check_flows(pred, pseudo)?;
    if weights.width() != pred.width() || weights.height() != pred.height() {
        return Err(Error::ShapeMismatch(
            "weight map and flow differ in shape".into(),
        ));
    }
    let mut sum = 0.0;
    for p in 0..pred.flow().len() {
        if !pred.valid()[p] || !pseudo.valid()[p] {
            continue;
        }
        let (a, b) = (pseudo.flow()[p], pred.flow()[p]);
        let d = ((a[0] as f64 - b[0] as f64).powi(2) + (a[1] as f64 - b[1] as f64).powi(2)).sqrt();
        sum += weights.weights()[p] as f64 * d;
    }
    Ok(sum)
}

/// Occlusion-aware flow loss with weights from the pseudo flows' cyclic
/// consistency.
pub fn flow_loss(
    pred: &FlowField,
    pseudo_fwd: &FlowField,
    pseudo_bwd: &FlowField,
    params: &FlowConsistencyParams,
) -> Result<f64> {
    let w = cyclic_weight(pseudo_fwd, pseudo_bwd, params)?;
    flow_loss_weighted(pred, pseudo_fwd, &w)
}

/// `Σ_views L2 + λ_SSIM·(1 - SSIM) + λ_LPIPS·LPIPS`, L2 being the mean over
/// pixels and channels.
pub fn photometric_loss(
    rendered: &[Image],
    targets: &[Image],
    loss: &LossSettings,
) -> Result<LossReport> {
    if rendered.len() != targets.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} rendered views vs {} targets",
            rendered.len(),
            targets.len()
        )));
    }
    let w = loss.weights;
    if !(w.ssim >= 0.0) || !(w.lpips >= 0.0) {
        return Err(Error::InvalidAttribute("negative loss weight".into()));
    }
    let mut report = LossReport::default();
    for (a, b) in rendered.iter().zip(targets) {
        let l2 = mse(a, b)?;
        let dssim = 1.0 - ssim(a, b)?;
        let lpips = match loss.scorer {
            Some(s) => s.distance(a, b)?,
            None => 0.0,
        };
        let total = l2 + w.ssim * dssim + w.lpips * lpips;
        report.l2 += l2;
        report.dssim += dssim;
        report.lpips += lpips;
        report.total += total;
        report.per_view.push(LossTerms {
            l2,
            dssim,
            lpips,
            total,
        });
    }
    Ok(report)
}

/// Renders the whole frame (all views' Gaussians) from each camera.
pub fn render_views(
    frame: &GaussianFrame,
    cameras: &[Camera],
    config: &RenderConfig,
    renderer: &dyn Renderer,
) -> Result<Vec<Image>> {
    let cloud = frame.flatten();
    cameras
        .iter()
        .map(|c| renderer.render(&cloud, c, config))
        .collect()
}

/// Photometric loss between `R(retarget(G_t))` and the given targets.
pub fn retargeting_loss_against(
    frame_t: &GaussianFrame,
    motions_t: &[MotionField],
    cameras: &[Camera],
    targets: &[Image],
    config: &RenderConfig,
    renderer: &dyn Renderer,
    loss: &LossSettings,
) -> Result<LossReport> {
    let moved = retarget(frame_t, motions_t, Direction::Backward)?;
    let rendered = render_views(&moved, cameras, config, renderer)?;
    photometric_loss(&rendered, targets, loss)
}

/// Retargeting loss against renders of `G_{t-1}` from the same cameras.
pub fn retargeting_loss(
    frame_t: &GaussianFrame,
    frame_tm1: &GaussianFrame,
    motions_t: &[MotionField],
    cameras: &[Camera],
    config: &RenderConfig,
    renderer: &dyn Renderer,
    loss: &LossSettings,
) -> Result<LossReport> {
    let targets = render_views(frame_tm1, cameras, config, renderer)?;
    retargeting_loss_against(
        frame_t, motions_t, cameras, &targets, config, renderer, loss,
    )
}
