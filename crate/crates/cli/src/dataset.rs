//! Reader for directories written by `g4d synth`.

use crate::failure::{usage, Outcome};
use anyhow::Context;
use g4d_core::io::{self, SceneManifest, TimestampEntry};
use g4d_core::metrics::TriangleMesh;
use g4d_core::synth::{generate_scene, SynthScene};
use g4d_core::{Camera, CameraSet, Direction, FlowField, GaussianFrame, Image, MotionField};
use std::path::{Path, PathBuf};

pub const MANIFEST_FILE: &str = "manifest.toml";

pub struct Dataset {
    dir: PathBuf,
    pub manifest: SceneManifest,
}

impl Dataset {
    pub fn open(dir: &Path) -> Outcome<Self> {
        let path = dir.join(MANIFEST_FILE);
        let manifest = io::read_manifest(&path).with_context(|| format!("reading {}", path.display()))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            manifest,
        })
    }

    pub fn timestamps(&self) -> usize {
        self.manifest.timestamps.len()
    }

    pub fn entry(&self, t: usize) -> Outcome<&TimestampEntry> {
        self.manifest
            .timestamps
            .get(t)
            .ok_or_else(|| usage(format!("timestamp {t} not in dataset (has {})", self.timestamps())))
    }

    fn path(&self, rel: &str) -> PathBuf {
        self.dir.join(rel)
    }

    pub fn frame(&self, t: usize) -> Outcome<GaussianFrame> {
        let p = self.path(&self.entry(t)?.frame);
        Ok(io::read_frame(&p).with_context(|| format!("reading {}", p.display()))?)
    }

    pub fn motions(&self, t: usize) -> Outcome<Vec<MotionField>> {
        self.entry(t)?
            .motions
            .iter()
            .map(|rel| {
                let p = self.path(rel);
                Ok(io::read_raster(&p)
                    .and_then(|r| r.into_motion())
                    .with_context(|| format!("reading {}", p.display()))?)
            })
            .collect()
    }

    /// Ground-truth flows of timestamp `t`; `None` where the direction is
    /// undefined.
    pub fn flows(&self, t: usize, dir: Direction) -> Outcome<Option<Vec<FlowField>>> {
        let e = self.entry(t)?;
        let list = match dir {
            Direction::Backward => &e.flows_backward,
            Direction::Forward => &e.flows_forward,
        };
        if list.is_empty() {
            return Ok(None);
        }
        list.iter()
            .map(|rel| {
                let p = self.path(rel);
                Ok(io::read_raster(&p)
                    .and_then(|r| r.into_flow())
                    .with_context(|| format!("reading {}", p.display()))?)
            })
            .collect::<Outcome<Vec<_>>>()
            .map(Some)
    }

    pub fn mesh(&self, t: usize) -> Outcome<TriangleMesh> {
        let p = self.path(&self.entry(t)?.mesh);
        Ok(io::read_mesh(&p).with_context(|| format!("reading {}", p.display()))?)
    }

    pub fn metric_mesh(&self, t: usize) -> Outcome<TriangleMesh> {
        let p = self.path(&self.entry(t)?.metric_mesh);
        Ok(io::read_mesh(&p).with_context(|| format!("reading {}", p.display()))?)
    }

    pub fn images(&self, t: usize) -> Outcome<Vec<Image>> {
        self.entry(t)?
            .images
            .iter()
            .map(|rel| {
                let p = self.path(rel);
                Ok(io::read_image(&p).with_context(|| format!("reading {}", p.display()))?)
            })
            .collect()
    }

    pub fn cameras(&self) -> Outcome<Vec<CameraSet>> {
        let p = self.path(&self.manifest.cameras);
        Ok(io::read_cameras(&p).with_context(|| format!("reading {}", p.display()))?)
    }

    pub fn metric_cameras(&self) -> Outcome<Vec<CameraSet>> {
        let p = self.path(&self.manifest.metric_cameras);
        Ok(io::read_cameras(&p).with_context(|| format!("reading {}", p.display()))?)
    }

    /// Image-resolution cameras of timestamp `t`.
    pub fn cameras_at(&self, t: usize) -> Outcome<CameraSet> {
        let mut sets = self.cameras()?;
        if t >= sets.len() {
            return Err(crate::failure::Failure::Data(anyhow::anyhow!(
                "camera file has {} timestamps, need {}",
                sets.len(),
                t + 1
            )));
        }
        Ok(sets.swap_remove(t))
    }

    /// Cameras resampled to the Gaussian maps' raster.
    pub fn raster_cameras(&self, t: usize, raster_width: usize) -> Outcome<Vec<Camera>> {
        let d = raster_width as f64 / self.manifest.scene.image_size as f64;
        Ok(self.cameras_at(t)?.iter().map(|c| c.with_resolution_scaled(d)).collect())
    }

    /// The generating scene, rebuilt from the stored configuration and seed.
    pub fn scene(&self) -> Outcome<SynthScene> {
        Ok(generate_scene(&self.manifest.scene, self.manifest.seed)?)
    }
}
