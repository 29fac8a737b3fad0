//! Occlusion-aware temporal fusion: dual-consistency distances, the τ split,
//! pair fusion and novel-time interpolation between two adjacent frames.

use crate::error::{Error, Result};
use crate::exec;
use crate::math::canonicalize;
use crate::model::{
    Camera, Direction, FlowField, Gaussian, GaussianCloud, GaussianFrame, Image, MotionField,
    SourceTag,
};
use crate::motion::{
    check_adjacent, check_motions, photometric_loss, pixel_at, project_scene_flow, time_fractions,
    LossReport, LossSettings,
};

pub const DEFAULT_TAU: f64 = 0.05;

/// Per-pixel distance `D` of one view. Pixels without a Gaussian hold `NaN`,
/// occluded or out-of-bounds retrievals hold `+inf`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConsistencyMap {
    width: usize,
    height: usize,
    view: u32,
    distances: Vec<f64>,
    /// Retrieved pixel in the other frame, when in bounds and valid.
    targets: Vec<Option<u32>>,
}

impl ConsistencyMap {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn view(&self) -> u32 {
        self.view
    }

    pub fn distances(&self) -> &[f64] {
        &self.distances
    }

    pub fn targets(&self) -> &[Option<u32>] {
        &self.targets
    }

    pub fn from_parts(
        width: usize,
        height: usize,
        view: u32,
        distances: Vec<f64>,
        targets: Vec<Option<u32>>,
    ) -> Result<Self> {
        if distances.len() != width * height || targets.len() != width * height {
            return Err(Error::ShapeMismatch("consistency map size".into()));
        }
        Ok(Self {
            width,
            height,
            view,
            distances,
            targets,
        })
    }

    /// Whether the pixel carries a Gaussian and `D > τ`.
    pub fn is_occluded(&self, p: usize, tau: f64) -> bool {
        let d = self.distances[p];
        !d.is_nan() && d > tau
    }
}

/// `D(p) = ‖P_src(p) + M(p) - P_dst(round(p + μ(p)))‖` for every view.
/// `motions` are the source frame's fields, `flows` map source pixels into
/// the destination frame.
pub fn dual_consistency(
    source: &GaussianFrame,
    dest: &GaussianFrame,
    motions: &[MotionField],
    direction: Direction,
    flows: &[FlowField],
) -> Result<Vec<ConsistencyMap>> {
    let (w, h) = (source.width(), source.height());
    let entries = consistency_entries(source, dest, motions, direction, flows)?;
    Ok(entries
        .into_iter()
        .enumerate()
        .map(|(v, e)| {
            let (distances, targets) = e.into_iter().unzip();
            ConsistencyMap {
                width: w,
                height: h,
                view: v as u32,
                distances,
                targets,
            }
        })
        .collect())
}

/// Per view `(D, retrieved pixel)`.
fn consistency_entries(
    source: &GaussianFrame,
    dest: &GaussianFrame,
    motions: &[MotionField],
    direction: Direction,
    flows: &[FlowField],
) -> Result<Vec<Vec<(f64, Option<u32>)>>> {
    let (w, h) = (source.width(), source.height());
    if dest.width() != w || dest.height() != h || dest.view_count() != source.view_count() {
        return Err(Error::ShapeMismatch(
            "source and destination frames differ in shape".into(),
        ));
    }
    if motions.len() != source.view_count() || flows.len() != source.view_count() {
        return Err(Error::ShapeMismatch(format!(
            "{} views, {} motion fields, {} flows",
            source.view_count(),
            motions.len(),
            flows.len()
        )));
    }
    let mut out = Vec::with_capacity(source.view_count());
    for v in 0..source.view_count() {
        let (m, f) = (&motions[v], &flows[v]);
        if m.width() != w || m.height() != h || f.width() != w || f.height() != h {
            return Err(Error::ShapeMismatch(format!("motion or flow of view {v}")));
        }
        let (src, dst) = (source.view(v), dest.view(v));
        let mv = m.direction(direction);
        out.push(exec::map_range(w * h, |p| {
            if !src.valid[p] {
                return (f64::NAN, None);
            }
            if !f.valid()[p] {
                return (f64::INFINITY, None);
            }
            let mu = f.flow()[p];
            let q = match pixel_at(
                (p % w) as f64 + mu[0] as f64,
                (p / w) as f64 + mu[1] as f64,
                w,
                h,
            ) {
                Some(q) if dst.valid[q] => q,
                _ => return (f64::INFINITY, None),
            };
            let (a, d, b) = (src.positions[p], mv[p], dst.positions[q]);
            let dist = (0..3)
                .map(|k| (a[k] as f64 + d[k] as f64 - b[k] as f64).powi(2))
                .sum::<f64>()
                .sqrt();
            (dist, Some(q as u32))
        }));
    }
    Ok(out)
}

/// A matched Gaussian pair: pixel `source` of the first frame and pixel
/// `target` of the second, in the same view.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct PairIndex {
    pub view: u32,
    pub source: u32,
    pub target: u32,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct OcclusionSplit {
    /// `(view, pixel)` with `D > τ`.
    pub occluded: Vec<(u32, u32)>,
    pub matched: Vec<PairIndex>,
}

impl OcclusionSplit {
    pub fn occluded_cloud(&self, frame: &GaussianFrame) -> GaussianCloud {
        let mut cloud = GaussianCloud::with_capacity(self.occluded.len());
        for &(v, p) in &self.occluded {
            cloud.push_unchecked(
                frame.view(v as usize).gaussian(p as usize),
                tag(frame, v, p),
            );
        }
        cloud
    }
}

fn tag(frame: &GaussianFrame, view: u32, pixel: u32) -> SourceTag {
    SourceTag {
        timestamp: frame.timestamp(),
        view,
        pixel,
    }
}

/// `D > τ` goes to the occluded set, the rest is paired with its retrieved
/// counterpart. Pixels without a Gaussian are skipped.
pub fn split_by_occlusion(maps: &[ConsistencyMap], tau: f64) -> Result<OcclusionSplit> {
    if !(tau > 0.0) || !tau.is_finite() {
        return Err(Error::InvalidThreshold(tau));
    }
    Ok(split_unchecked(maps, tau))
}

fn split_unchecked(maps: &[ConsistencyMap], tau: f64) -> OcclusionSplit {
    let mut split = OcclusionSplit::default();
    for m in maps {
        for (p, (&d, t)) in m.distances.iter().zip(&m.targets).enumerate() {
            if d.is_nan() {
                continue;
            }
            match t {
                Some(q) if d <= tau => split.matched.push(PairIndex {
                    view: m.view,
                    source: p as u32,
                    target: *q,
                }),
                _ => split.occluded.push((m.view, p as u32)),
            }
        }
    }
    split
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Tanh,
    Identity,
}

impl Activation {
    pub fn code(self) -> u32 {
        match self {
            Activation::Relu => 0,
            Activation::Tanh => 1,
            Activation::Identity => 2,
        }
    }

    pub fn from_code(c: u32) -> Option<Self> {
        match c {
            0 => Some(Activation::Relu),
            1 => Some(Activation::Tanh),
            2 => Some(Activation::Identity),
            _ => None,
        }
    }

    fn apply(self, x: f32) -> f32 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::Tanh => x.tanh(),
            Activation::Identity => x,
        }
    }
}

/// Per-member attribute block: offset from the pair midpoint (3), opacity,
/// color (3), rotation (4), scale (3).
pub const MEMBER_FEATURES: usize = 14;
/// Both members plus the consistency distance.
pub const MLP_INPUTS: usize = 2 * MEMBER_FEATURES + 1;
/// Offset from the midpoint, opacity, color, rotation, scale.
pub const MLP_OUTPUTS: usize = MEMBER_FEATURES;
pub const DEFAULT_HIDDEN: usize = 64;
/// Self-description stored in weight files.
pub const MLP_LAYOUT: &str =
    "in:a.dp3,a.o1,a.c3,a.q4,a.s3,b.dp3,b.o1,b.c3,b.q4,b.s3,d1;out:dp3,o1,c3,q4,s3";
const MIN_SCALE: f32 = 1e-8;

/// Two-layer perceptron `W2·act(W1·x + b1) + b2`, row-major weights.
#[derive(Debug, Clone, PartialEq)]
pub struct FusionMlp {
    activation: Activation,
    hidden: usize,
    w1: Vec<f32>,
    b1: Vec<f32>,
    w2: Vec<f32>,
    b2: Vec<f32>,
}

impl FusionMlp {
    pub fn new(
        activation: Activation,
        hidden: usize,
        w1: Vec<f32>,
        b1: Vec<f32>,
        w2: Vec<f32>,
        b2: Vec<f32>,
    ) -> Result<Self> {
        let expect = [
            ("W1", w1.len(), hidden * MLP_INPUTS),
            ("b1", b1.len(), hidden),
            ("W2", w2.len(), MLP_OUTPUTS * hidden),
            ("b2", b2.len(), MLP_OUTPUTS),
        ];
        for (name, got, want) in expect {
            if got != want || hidden == 0 {
                return Err(Error::WeightFileMismatch(format!(
                    "{name} has {got} values, expected {want}"
                )));
            }
        }
        if w1
            .iter()
            .chain(&b1)
            .chain(&w2)
            .chain(&b2)
            .any(|v| !v.is_finite())
        {
            return Err(Error::WeightFileMismatch("non-finite weight".into()));
        }
        Ok(Self {
            activation,
            hidden,
            w1,
            b1,
            w2,
            b2,
        })
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn hidden(&self) -> usize {
        self.hidden
    }

    pub fn w1(&self) -> &[f32] {
        &self.w1
    }

    pub fn b1(&self) -> &[f32] {
        &self.b1
    }

    pub fn w2(&self) -> &[f32] {
        &self.w2
    }

    pub fn b2(&self) -> &[f32] {
        &self.b2
    }

    pub fn forward(&self, x: &[f32; MLP_INPUTS]) -> [f32; MLP_OUTPUTS] {
        let mut h = vec![0.0f32; self.hidden];
        for (j, hj) in h.iter_mut().enumerate() {
            let row = &self.w1[j * MLP_INPUTS..(j + 1) * MLP_INPUTS];
            let s: f32 = row.iter().zip(x).map(|(a, b)| a * b).sum();
            *hj = self.activation.apply(s + self.b1[j]);
        }
        std::array::from_fn(|k| {
            let row = &self.w2[k * self.hidden..(k + 1) * self.hidden];
            row.iter().zip(&h).map(|(a, b)| a * b).sum::<f32>() + self.b2[k]
        })
    }

    /// Weights whose forward pass is the plain attribute average:
    /// `W1 = [A; -A]`, `W2 = [B, -B]` with ReLU, so `out = B·A·x`.
    pub fn averaging() -> Self {
        let hidden = DEFAULT_HIDDEN;
        let mut w1 = vec![0.0; hidden * MLP_INPUTS];
        let mut w2 = vec![0.0; MLP_OUTPUTS * hidden];
        for k in 0..MEMBER_FEATURES {
            for (row, sign) in [(k, 1.0), (k + MEMBER_FEATURES, -1.0)] {
                w1[row * MLP_INPUTS + k] = 0.5 * sign;
                w1[row * MLP_INPUTS + MEMBER_FEATURES + k] = 0.5 * sign;
            }
            w2[k * hidden + k] = 1.0;
            w2[k * hidden + k + MEMBER_FEATURES] = -1.0;
        }
        Self::new(
            Activation::Relu,
            hidden,
            w1,
            vec![0.0; hidden],
            w2,
            vec![0.0; MLP_OUTPUTS],
        )
        .unwrap()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum FusionFunction {
    Average,
    Mlp(FusionMlp),
}

fn member_features(g: &Gaussian, q: &[f64; 4], mid: &[f64; 3]) -> [f32; MEMBER_FEATURES] {
    [
        (g.position[0] as f64 - mid[0]) as f32,
        (g.position[1] as f64 - mid[1]) as f32,
        (g.position[2] as f64 - mid[2]) as f32,
        g.opacity,
        g.color[0],
        g.color[1],
        g.color[2],
        q[0] as f32,
        q[1] as f32,
        q[2] as f32,
        q[3] as f32,
        g.scale[0],
        g.scale[1],
        g.scale[2],
    ]
}

fn midpoint(a: &Gaussian, b: &Gaussian) -> [f64; 3] {
    std::array::from_fn(|k| 0.5 * (a.position[k] as f64 + b.position[k] as f64))
}

fn normalized_or(q: [f64; 4], fallback: [f32; 4]) -> [f32; 4] {
    let n = (q.iter().map(|c| c * c).sum::<f64>()).sqrt();
    if n > 1e-12 && n.is_finite() {
        q.map(|c| (c / n) as f32)
    } else {
        fallback
    }
}

/// `a`'s rotation canonicalized and `b`'s flipped into the same hemisphere.
fn aligned_rotations(a: &Gaussian, b: &Gaussian) -> ([f64; 4], [f64; 4]) {
    let qa = canonicalize(a.rotation.map(|c| c as f64));
    let qb = canonicalize(b.rotation.map(|c| c as f64));
    let dot: f64 = qa.iter().zip(&qb).map(|(x, y)| x * y).sum();
    let sign = if dot < 0.0 { -1.0 } else { 1.0 };
    (qa, qb.map(|c| sign * c))
}

/// Symmetric attribute average. Rotations are sign-aligned, averaged,
/// renormalized and canonicalized to `w >= 0`.
pub fn average_pair(a: &Gaussian, b: &Gaussian) -> Gaussian {
    let mean3 = |x: [f32; 3], y: [f32; 3]| -> [f32; 3] {
        std::array::from_fn(|k| ((x[k] as f64 + y[k] as f64) * 0.5) as f32)
    };
    let (qa, qb) = aligned_rotations(a, b);
    let q = canonicalize(std::array::from_fn(|k| 0.5 * (qa[k] + qb[k])));
    Gaussian {
        position: mean3(a.position, b.position),
        opacity: ((a.opacity as f64 + b.opacity as f64) * 0.5) as f32,
        color: mean3(a.color, b.color),
        rotation: normalized_or(q, a.rotation),
        scale: mean3(a.scale, b.scale),
    }
}

impl FusionFunction {
    pub fn fuse_pair(&self, a: &Gaussian, b: &Gaussian, distance: f64) -> Gaussian {
        match self {
            FusionFunction::Average => average_pair(a, b),
            FusionFunction::Mlp(mlp) => {
                let mid = midpoint(a, b);
                let (qa, qb) = aligned_rotations(a, b);
                let mut x = [0.0f32; MLP_INPUTS];
                x[..MEMBER_FEATURES].copy_from_slice(&member_features(a, &qa, &mid));
                x[MEMBER_FEATURES..2 * MEMBER_FEATURES]
                    .copy_from_slice(&member_features(b, &qb, &mid));
                x[MLP_INPUTS - 1] = distance as f32;
                let y = mlp.forward(&x);
                let finite = |v: f32, fallback: f32| if v.is_finite() { v } else { fallback };
                Gaussian {
                    position: std::array::from_fn(|k| (mid[k] + finite(y[k], 0.0) as f64) as f32),
                    opacity: finite(y[3], 0.0).clamp(0.0, 1.0),
                    color: std::array::from_fn(|k| finite(y[4 + k], 0.0).clamp(0.0, 1.0)),
                    rotation: normalized_or(
                        canonicalize(std::array::from_fn(|k| finite(y[7 + k], 0.0) as f64)),
                        a.rotation,
                    ),
                    scale: std::array::from_fn(|k| {
                        finite(y[11 + k], MIN_SCALE).abs().max(MIN_SCALE)
                    }),
                }
            }
        }
    }
}

/// Fuses `pairs[i] = (a, b, D)` into one Gaussian each, tagged with `tags[i]`.
pub fn fuse(
    pairs: &[(Gaussian, Gaussian, f64)],
    tags: &[SourceTag],
    function: &FusionFunction,
) -> Result<GaussianCloud> {
    if pairs.len() != tags.len() {
        return Err(Error::LengthMismatch(format!(
            "{} pairs, {} tags",
            pairs.len(),
            tags.len()
        )));
    }
    let fused = exec::map_slice(pairs, |_, (a, b, d)| function.fuse_pair(a, b, *d));
    let mut cloud = GaussianCloud::with_capacity(fused.len());
    for (g, t) in fused.into_iter().zip(tags) {
        cloud.push_unchecked(g, *t);
    }
    Ok(cloud)
}

/// Where the pixel correspondences between the two frames come from.
#[derive(Clone, Copy)]
pub enum FlowSource<'a> {
    /// Per-view flows `t -> t-1` and `t-1 -> t`.
    Given {
        backward: &'a [FlowField],
        forward: &'a [FlowField],
    },
    /// Project each frame's motion through the per-view cameras.
    Project(&'a [Camera]),
}

/// Everything needed to interpolate between frames `t-1` and `t`.
pub struct InterpolationInput<'a> {
    pub frame_t: &'a GaussianFrame,
    pub frame_tm1: &'a GaussianFrame,
    /// Motion fields of frame `t` (the backward part is used).
    pub motions_t: &'a [MotionField],
    /// Motion fields of frame `t-1` (the forward part is used).
    pub motions_tm1: &'a [MotionField],
    pub flows: FlowSource<'a>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Interpolation {
    pub cloud: GaussianCloud,
    pub occluded_t: usize,
    pub occluded_tm1: usize,
    pub pairs: usize,
}

fn flows_for(
    frame: &GaussianFrame,
    motions: &[MotionField],
    dir: Direction,
    cameras: &[Camera],
) -> Result<Vec<FlowField>> {
    if cameras.len() != frame.view_count() || motions.len() != frame.view_count() {
        return Err(Error::ShapeMismatch(format!(
            "{} views, {} cameras, {} motion fields",
            frame.view_count(),
            cameras.len(),
            motions.len()
        )));
    }
    motions
        .iter()
        .zip(cameras)
        .enumerate()
        .map(|(v, (m, c))| {
            if m.view() as usize != v {
                return Err(Error::ShapeMismatch(format!(
                    "motion field {v} belongs to view {}",
                    m.view()
                )));
            }
            project_scene_flow(frame, m, dir, c)
        })
        .collect()
}

/// Consistency maps in both directions: `t -> t-1` then `t-1 -> t`.
pub fn consistency_both(
    input: &InterpolationInput,
) -> Result<(Vec<ConsistencyMap>, Vec<ConsistencyMap>)> {
    let (bwd, fwd);
    let (fb, ff): (&[FlowField], &[FlowField]) = match input.flows {
        FlowSource::Given { backward, forward } => (backward, forward),
        FlowSource::Project(cams) => {
            bwd = flows_for(input.frame_t, input.motions_t, Direction::Backward, cams)?;
            fwd = flows_for(input.frame_tm1, input.motions_tm1, Direction::Forward, cams)?;
            (&bwd, &fwd)
        }
    };
    let dt = dual_consistency(
        input.frame_t,
        input.frame_tm1,
        input.motions_t,
        Direction::Backward,
        fb,
    )?;
    let dp = dual_consistency(
        input.frame_tm1,
        input.frame_t,
        input.motions_tm1,
        Direction::Forward,
        ff,
    )?;
    Ok((dt, dp))
}

/// One frame seen at `t'` without materializing the warped copy.
struct Warped<'a> {
    frame: &'a GaussianFrame,
    motions: &'a [MotionField],
    direction: Direction,
    frac: f64,
}

impl Warped<'_> {
    fn gaussian(&self, view: u32, pixel: u32) -> Gaussian {
        let (v, p) = (view as usize, pixel as usize);
        let mut g = self.frame.view(v).gaussian(p);
        if self.frac != 0.0 {
            let m = self.motions[v].direction(self.direction)[p];
            g.position =
                std::array::from_fn(|k| (g.position[k] as f64 + self.frac * m[k] as f64) as f32);
        }
        g
    }

    fn tag(&self, view: u32, pixel: u32) -> SourceTag {
        tag(self.frame, view, pixel)
    }
}

const FUSE_CHUNK: usize = 16384;

/// Novel-time Gaussians at `t'`: the occluded Gaussians of both warped
/// frames followed by the fused matched pairs.
///
/// Pairs come from matched pixels of frame `t` and their retrieved partner
/// in `t-1`, plus matched pixels of `t-1` that no `t` pixel retrieved,
/// paired with their own partner in `t`.
pub fn interpolate_time(
    input: &InterpolationInput,
    t_prime: f64,
    tau: f64,
    function: &FusionFunction,
) -> Result<Interpolation> {
    if !(tau >= 0.0) || !tau.is_finite() {
        return Err(Error::InvalidThreshold(tau));
    }
    let (ft, fp) = (input.frame_t, input.frame_tm1);
    check_adjacent(ft, fp)?;
    check_motions(ft, input.motions_t)?;
    check_motions(fp, input.motions_tm1)?;
    let (frac_t, frac_p) = time_fractions(ft.timestamp(), t_prime)?;
    let wt = Warped {
        frame: ft,
        motions: input.motions_t,
        direction: Direction::Backward,
        frac: frac_t,
    };
    let wp = Warped {
        frame: fp,
        motions: input.motions_tm1,
        direction: Direction::Forward,
        frac: frac_p,
    };

    let (bwd, fwd);
    let (fb, ff): (&[FlowField], &[FlowField]) = match input.flows {
        FlowSource::Given { backward, forward } => (backward, forward),
        FlowSource::Project(cams) => {
            bwd = flows_for(ft, input.motions_t, Direction::Backward, cams)?;
            fwd = flows_for(fp, input.motions_tm1, Direction::Forward, cams)?;
            (&bwd, &fwd)
        }
    };
    let et = consistency_entries(ft, fp, input.motions_t, Direction::Backward, fb)?;
    let ep = consistency_entries(fp, ft, input.motions_tm1, Direction::Forward, ff)?;

    let n = ft.pixel_count();
    let mut claimed = vec![false; n * ft.view_count()];
    let (mut occ_t, mut occ_p) = (Vec::new(), Vec::new());
    // (view, pixel in t, pixel in t-1, D)
    let mut pairs: Vec<(u32, u32, u32, f64)> = Vec::new();
    for (v, e) in et.iter().enumerate() {
        for (p, &(d, q)) in e.iter().enumerate() {
            match q {
                _ if d.is_nan() => {}
                Some(q) if d <= tau => {
                    claimed[v * n + q as usize] = true;
                    pairs.push((v as u32, p as u32, q, d));
                }
                _ => occ_t.push((v as u32, p as u32)),
            }
        }
    }
    for (v, e) in ep.iter().enumerate() {
        for (p, &(d, q)) in e.iter().enumerate() {
            match q {
                _ if d.is_nan() => {}
                Some(q) if d <= tau => {
                    if !claimed[v * n + p] {
                        pairs.push((v as u32, q, p as u32, d));
                    }
                }
                _ => occ_p.push((v as u32, p as u32)),
            }
        }
    }
    drop((et, ep, claimed));

    let mut cloud = GaussianCloud::with_capacity(occ_t.len() + occ_p.len() + pairs.len());
    for (w, occ) in [(&wt, &occ_t), (&wp, &occ_p)] {
        for &(v, p) in occ {
            cloud.push_unchecked(w.gaussian(v, p), w.tag(v, p));
        }
    }
    for chunk in pairs.chunks(FUSE_CHUNK) {
        let fused = exec::map_slice(chunk, |_, &(v, a, b, d)| {
            function.fuse_pair(&wt.gaussian(v, a), &wp.gaussian(v, b), d)
        });
        for (g, &(v, a, _, _)) in fused.into_iter().zip(chunk) {
            cloud.push_unchecked(g, wt.tag(v, a));
        }
    }
    if let Some(i) = cloud
        .positions()
        .iter()
        .position(|p| p.iter().any(|c| !c.is_finite()))
    {
        return Err(Error::NonFiniteValue(format!(
            "warped position of Gaussian {i}"
        )));
    }
    Ok(Interpolation {
        occluded_t: occ_t.len(),
        occluded_tm1: occ_p.len(),
        pairs: pairs.len(),
        cloud,
    })
}

/// Photometric loss of novel-time renders against their targets.
pub fn fusion_loss(
    rendered: &[Image],
    targets: &[Image],
    loss: &LossSettings,
) -> Result<LossReport> {
    photometric_loss(rendered, targets, loss)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ViewMaps;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn g(pos: [f32; 3], q: [f32; 4]) -> Gaussian {
        Gaussian {
            position: pos,
            opacity: 0.6,
            color: [0.2, 0.4, 0.6],
            rotation: q,
            scale: [0.1, 0.2, 0.3],
        }
    }

    fn random_gaussian(rng: &mut ChaCha8Rng) -> Gaussian {
        let q: [f32; 4] = [
            rng.gen_range(0.2..1.0),
            rng.gen_range(-0.5..0.5),
            rng.gen_range(-0.5..0.5),
            rng.gen_range(-0.5..0.5),
        ];
        let n = q.iter().map(|c| c * c).sum::<f32>().sqrt();
        Gaussian {
            position: std::array::from_fn(|_| rng.gen_range(-1.0..1.0)),
            opacity: rng.gen(),
            color: std::array::from_fn(|_| rng.gen()),
            rotation: q.map(|c| c / n),
            scale: std::array::from_fn(|_| rng.gen_range(0.01..0.1)),
        }
    }

    fn grid_frame(w: usize, h: usize, t: i64, z: f32) -> GaussianFrame {
        let mut m = ViewMaps::empty(w * h);
        for p in 0..w * h {
            m.set_gaussian(
                p,
                &g([(p % w) as f32, (p / w) as f32, z], [1.0, 0.0, 0.0, 0.0]),
            );
            m.valid[p] = true;
        }
        GaussianFrame::new(w, h, t, vec![m]).unwrap()
    }

    #[test]
    fn average_midpoint_and_idempotent() {
        let a = g([0.0, 0.0, 0.0], [1.0, 0.0, 0.0, 0.0]);
        let b = g([2.0, 0.0, 0.0], [1.0, 0.0, 0.0, 0.0]);
        assert_eq!(average_pair(&a, &b).position, [1.0, 0.0, 0.0]);
        assert_eq!(average_pair(&a, &a), a);
    }

    #[test]
    fn antipodal_quaternions_align() {
        let s = std::f32::consts::FRAC_1_SQRT_2;
        let a = g([0.0; 3], [s, s, 0.0, 0.0]);
        let b = g([0.0; 3], [-s, -s, 0.0, 0.0]);
        let f = average_pair(&a, &b);
        assert!((f.rotation[0] - s).abs() < 1e-6 && (f.rotation[1] - s).abs() < 1e-6);
    }

    #[test]
    fn average_is_symmetric() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..200 {
            let (a, b) = (random_gaussian(&mut rng), random_gaussian(&mut rng));
            assert_eq!(average_pair(&a, &b), average_pair(&b, &a));
        }
    }

    #[test]
    fn averaging_mlp_reproduces_average() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let f = FusionFunction::Mlp(FusionMlp::averaging());
        for _ in 0..100 {
            let (a, b) = (random_gaussian(&mut rng), random_gaussian(&mut rng));
            let x = f.fuse_pair(&a, &b, 0.01);
            let y = average_pair(&a, &b);
            for k in 0..3 {
                assert!((x.position[k] - y.position[k]).abs() < 1e-5);
                assert!((x.color[k] - y.color[k]).abs() < 1e-5);
                assert!((x.scale[k] - y.scale[k]).abs() < 1e-5);
            }
            assert!((x.opacity - y.opacity).abs() < 1e-5);
            for k in 0..4 {
                assert!((x.rotation[k] - y.rotation[k]).abs() < 1e-5);
            }
        }
    }

    #[test]
    fn mlp_shape_checked() {
        let r = FusionMlp::new(
            Activation::Relu,
            64,
            vec![0.0; 10],
            vec![0.0; 64],
            vec![0.0; 14 * 64],
            vec![0.0; 14],
        );
        assert!(matches!(r, Err(Error::WeightFileMismatch(_))));
    }

    #[test]
    fn consistency_zero_for_static_frames() {
        let ft = grid_frame(5, 4, 1, 2.0);
        let fp = grid_frame(5, 4, 0, 2.0);
        let m = vec![MotionField::zeros(5, 4, 0, 1)];
        let fl = vec![FlowField::uniform(5, 4, [0.0, 0.0]).unwrap()];
        let d = dual_consistency(&ft, &fp, &m, Direction::Backward, &fl).unwrap();
        assert!(d[0].distances().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn consistency_out_of_bounds_is_infinite() {
        let ft = grid_frame(5, 4, 1, 2.0);
        let fp = grid_frame(5, 4, 0, 2.0);
        let m = vec![MotionField::zeros(5, 4, 0, 1)];
        let fl = vec![FlowField::uniform(5, 4, [2.0, 0.0]).unwrap()];
        let d = dual_consistency(&ft, &fp, &m, Direction::Backward, &fl).unwrap();
        for p in 0..20 {
            let x = p % 5;
            assert_eq!(d[0].distances()[p].is_infinite(), x + 2 > 4);
        }
    }

    #[test]
    fn split_counts_match_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 400;
        let dist: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..0.1)).collect();
        let map =
            ConsistencyMap::from_parts(20, 20, 0, dist.clone(), (0..n as u32).map(Some).collect())
                .unwrap();
        let s = split_by_occlusion(&[map], 0.05).unwrap();
        let expected = dist.iter().filter(|d| **d > 0.05).count();
        assert_eq!(s.occluded.len(), expected);
        assert_eq!(s.matched.len(), n - expected);
    }

    #[test]
    fn split_extremes() {
        let zero =
            ConsistencyMap::from_parts(2, 1, 0, vec![0.0, 0.0], vec![Some(0), Some(1)]).unwrap();
        assert!(split_by_occlusion(&[zero], 0.05)
            .unwrap()
            .occluded
            .is_empty());
        let inf =
            ConsistencyMap::from_parts(2, 1, 0, vec![f64::INFINITY; 2], vec![None; 2]).unwrap();
        assert!(split_by_occlusion(std::slice::from_ref(&inf), 0.05)
            .unwrap()
            .matched
            .is_empty());
        assert!(matches!(
            split_by_occlusion(&[inf], 0.0),
            Err(Error::InvalidThreshold(_))
        ));
    }

    #[test]
    fn interpolation_count_identity() {
        let ft = grid_frame(6, 5, 1, 2.0);
        let fp = grid_frame(6, 5, 0, 2.0);
        let mt = vec![MotionField::zeros(6, 5, 0, 1)];
        let mp = vec![MotionField::zeros(6, 5, 0, 0)];
        let bwd = vec![FlowField::uniform(6, 5, [1.0, 0.0]).unwrap()];
        let fwd = vec![FlowField::uniform(6, 5, [-1.0, 0.0]).unwrap()];
        let input = InterpolationInput {
            frame_t: &ft,
            frame_tm1: &fp,
            motions_t: &mt,
            motions_tm1: &mp,
            flows: FlowSource::Given {
                backward: &bwd,
                forward: &fwd,
            },
        };
        // retrieved positions are one unit apart, so everything is occluded at
        // τ = 0.5 and fully matched at τ = 2
        let r = interpolate_time(&input, 0.5, 0.5, &FusionFunction::Average).unwrap();
        assert_eq!(r.pairs, 0);
        assert_eq!(r.cloud.len(), 60);
        let r = interpolate_time(&input, 0.5, 2.0, &FusionFunction::Average).unwrap();
        assert_eq!(r.cloud.len(), r.occluded_t + r.occluded_tm1 + r.pairs);
        assert_eq!(r.occluded_t, 5);
        assert_eq!(r.occluded_tm1, 5);
        assert_eq!(r.pairs, 25);
    }
}
