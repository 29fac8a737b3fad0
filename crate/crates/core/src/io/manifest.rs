use crate::error::{Error, Result};
use crate::synth::{BakeParams, SceneConfig};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

pub const MANIFEST_FORMAT: &str = "g4d-scene";

/// Index of a synthesized dataset directory. Paths are relative to the
/// manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneManifest {
    pub format: String,
    pub version: u32,
    /// Kept as a string: TOML integers are signed 64-bit.
    #[serde(serialize_with = "seed_out", deserialize_with = "seed_in")]
    pub seed: u64,
    pub scene: SceneConfig,
    pub bake: BakeParams,
    /// Normalized-unit cameras, one set per timestamp.
    pub cameras: String,
    pub metric_cameras: String,
    pub timestamps: Vec<TimestampEntry>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TimestampEntry {
    pub index: usize,
    pub frame: String,
    pub mesh: String,
    pub metric_mesh: String,
    /// One per view.
    pub motions: Vec<String>,
    /// Empty when the direction is undefined.
    pub flows_backward: Vec<String>,
    pub flows_forward: Vec<String>,
    /// Lossless float images.
    pub images: Vec<String>,
    pub previews: Vec<String>,
}

fn seed_out<S: Serializer>(seed: &u64, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&seed.to_string())
}

fn seed_in<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<u64, D::Error> {
    let s = String::deserialize(d)?;
    s.parse().map_err(serde::de::Error::custom)
}

impl SceneManifest {
    pub fn new(seed: u64, scene: SceneConfig, bake: BakeParams) -> Self {
        Self {
            format: MANIFEST_FORMAT.into(),
            version: super::binary::FORMAT_VERSION,
            seed,
            scene,
            bake,
            cameras: "cameras.toml".into(),
            metric_cameras: "cameras_metric.toml".into(),
            timestamps: Vec::new(),
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("manifest serializes")
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let m: Self = toml::from_str(text).map_err(|e| {
            let (line, column) = e
                .span()
                .map_or((1, 1), |s| super::cameras::locate(text, s.start));
            Error::Parse {
                line,
                column,
                message: e.message().to_string(),
            }
        })?;
        if m.format != MANIFEST_FORMAT {
            return Err(Error::CorruptHeader(format!(
                "manifest format {:?}",
                m.format
            )));
        }
        if m.version != super::binary::FORMAT_VERSION {
            return Err(Error::VersionUnsupported {
                found: m.version,
                supported: super::binary::FORMAT_VERSION,
            });
        }
        m.scene.validate()?;
        m.bake.validate()?;
        Ok(m)
    }
}

pub fn write_manifest(path: impl AsRef<std::path::Path>, m: &SceneManifest) -> Result<()> {
    Ok(std::fs::write(path, m.to_toml())?)
}

pub fn read_manifest(path: impl AsRef<std::path::Path>) -> Result<SceneManifest> {
    let text = std::fs::read_to_string(path)?;
    SceneManifest::from_toml(&text)
}
