//! Scene manifests: JSON bundles pairing each lighting's photo (or exposure
//! stack) with its environment map. Paths resolve against the manifest's
//! directory and unknown fields are rejected.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::renderer::ViewSetup;
use crate::sync::CaptureRecord;

pub const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case", deny_unknown_fields)]
pub enum Camera {
    /// One view direction (toward the camera) for every pixel.
    Shared { direction: [f64; 3] },
    Pinhole { focal: f64, principal: [f64; 2] },
}

impl Default for Camera {
    fn default() -> Self {
        Camera::Shared {
            direction: [0.0, 0.0, 1.0],
        }
    }
}

impl Camera {
    pub fn view(&self, width: usize, height: usize) -> Result<ViewSetup> {
        match self {
            Camera::Shared { direction } => ViewSetup::shared(width, height, *direction),
            Camera::Pinhole { focal, principal } => ViewSetup::pinhole(width, height, *focal, *principal),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExposureEntry {
    pub path: PathBuf,
    pub exposure_s: f64,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Capture {
    pub lighting: String,
    pub scene_timestamp: Option<f64>,
    pub envmap_timestamp: Option<f64>,
    pub image: Option<PathBuf>,
    #[serde(default)]
    pub exposures: Vec<ExposureEntry>,
    pub envmap: Option<PathBuf>,
    pub mask: Option<PathBuf>,
    pub gbuffer: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneManifest {
    pub version: u32,
    pub scene: String,
    #[serde(default)]
    pub camera: Camera,
    pub captures: Vec<Capture>,
    /// Directory of the manifest file; filled in by [`SceneManifest::load`].
    #[serde(skip)]
    pub root: PathBuf,
}

fn manifest_err(path: impl Into<String>, reason: impl Into<String>) -> Error {
    Error::Manifest {
        path: path.into(),
        reason: reason.into(),
    }
}

impl SceneManifest {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        if !path.exists() {
            return Err(Error::MissingFile(path.to_path_buf()));
        }
        let text = std::fs::read_to_string(path)?;
        let root = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::parse(&text, root)
    }

    /// Parses and validates manifest text whose relative paths live in `root`.
    pub fn parse(text: &str, root: PathBuf) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let mut m: SceneManifest = serde_path_to_error::deserialize(de).map_err(|e| {
            let at = e.path().to_string();
            manifest_err(if at == "." { "$".to_string() } else { at }, e.into_inner().to_string())
        })?;
        m.root = root;
        m.validate()?;
        Ok(m)
    }

    fn validate(&mut self) -> Result<()> {
        if self.version != MANIFEST_VERSION {
            return Err(manifest_err(
                "version",
                format!("unsupported version {}, expected {MANIFEST_VERSION}", self.version),
            ));
        }
        if self.captures.is_empty() {
            return Err(manifest_err("captures", "at least one capture is required"));
        }
        let mut seen = HashSet::new();
        for (i, c) in self.captures.iter().enumerate() {
            if !seen.insert(c.lighting.clone()) {
                return Err(manifest_err(
                    format!("captures[{i}].lighting"),
                    format!("duplicate lighting id `{}`", c.lighting),
                ));
            }
            if c.image.is_some() && !c.exposures.is_empty() {
                return Err(manifest_err(
                    format!("captures[{i}]"),
                    "give either `image` or `exposures`, not both",
                ));
            }
            for (name, t) in [("scene_timestamp", c.scene_timestamp), ("envmap_timestamp", c.envmap_timestamp)] {
                if t.is_some_and(|t| !t.is_finite()) {
                    return Err(manifest_err(format!("captures[{i}].{name}"), "must be finite"));
                }
            }
        }
        let root = self.root.clone();
        let resolve = |p: &mut PathBuf, field: String| -> Result<()> {
            if p.is_relative() {
                *p = root.join(&*p);
            }
            if !p.exists() {
                return Err(manifest_err(field, format!("file not found: {}", p.display())));
            }
            Ok(())
        };
        for (i, c) in self.captures.iter_mut().enumerate() {
            for (name, slot) in [
                ("image", &mut c.image),
                ("envmap", &mut c.envmap),
                ("mask", &mut c.mask),
                ("gbuffer", &mut c.gbuffer),
            ] {
                if let Some(p) = slot {
                    resolve(p, format!("captures[{i}].{name}"))?;
                }
            }
            for (j, e) in c.exposures.iter_mut().enumerate() {
                resolve(&mut e.path, format!("captures[{i}].exposures[{j}].path"))?;
            }
        }
        Ok(())
    }

    pub fn lighting_ids(&self) -> Vec<String> {
        self.captures.iter().map(|c| c.lighting.clone()).collect()
    }

    /// Timestamp pairs for synchronization checks; every capture needs both.
    pub fn capture_records(&self) -> Result<Vec<CaptureRecord>> {
        self.captures
            .iter()
            .enumerate()
            .map(|(i, c)| {
                let missing = |name: &str| manifest_err(format!("captures[{i}].{name}"), "timestamp required");
                Ok(CaptureRecord {
                    scene: self.scene.clone(),
                    lighting: c.lighting.clone(),
                    scene_timestamp: c.scene_timestamp.ok_or_else(|| missing("scene_timestamp"))?,
                    envmap_timestamp: c.envmap_timestamp.ok_or_else(|| missing("envmap_timestamp"))?,
                })
            })
            .collect()
    }
}
