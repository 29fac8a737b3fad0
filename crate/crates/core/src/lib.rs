//! Feed-forward 4D Gaussian reconstruction toolkit: per-pixel Gaussian frames,
//! camera gauge recovery, splat rendering, motion retargeting, temporal
//! fusion, evaluation metrics, a synthetic scene generator and file formats.

pub mod error;
mod exec;
pub mod fixtures;
pub mod fusion;
pub mod gauge;
pub mod io;
mod math;
pub mod metrics;
pub mod model;
pub mod motion;
pub mod render;
pub mod selftest;
pub mod synth;

pub use error::{Error, Result};
pub use exec::is_parallel;
pub use model::{
    Camera, CameraSet, Direction, FlowField, Gaussian, GaussianCloud, GaussianFrame, Image,
    Intrinsics, MotionField, SourceTag, ViewMaps, WeightMap,
};
pub use render::{RenderConfig, Renderer, RendererKind};
