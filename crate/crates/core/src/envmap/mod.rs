//! Equirectangular environment maps and the lighting assets derived from
//! them: SH diffuse irradiance and a roughness-indexed specular chain.

mod cache;
pub mod mapping;
pub mod prefilter;
pub mod sh;

pub use cache::{cache_file_name, cached_assets, decode_assets, encode_assets, load_assets, save_assets, CACHE_VERSION};
pub use prefilter::{prefilter_env, sample_specular, PrefilteredEnv, PREFILTER_SAMPLES};
pub use sh::{sh_basis, sh_eval_irradiance, sh_project, ShCoefficients, SH_COUNT};

use sha2::{Digest, Sha256};

use crate::error::{invalid, Error, Result};
use crate::imaging::LinearImage;
use crate::math::Vec3;

/// Equirectangular HDR illumination, `width == 2 * height`.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvironmentMap {
    image: LinearImage,
}

impl EnvironmentMap {
    pub fn new(image: LinearImage) -> Result<Self> {
        if image.width() != 2 * image.height() {
            return Err(Error::InvalidImage(format!(
                "equirectangular map must be 2:1, got {}x{}",
                image.width(),
                image.height()
            )));
        }
        Ok(Self { image })
    }

    pub fn image(&self) -> &LinearImage {
        &self.image
    }

    pub fn width(&self) -> usize {
        self.image.width()
    }

    pub fn height(&self) -> usize {
        self.image.height()
    }

    /// Continuous pixel coordinate `(u, v)` of a unit direction.
    pub fn direction_to_pixel(&self, d: Vec3) -> Result<(f64, f64)> {
        if (d.length() - 1.0).abs() > mapping::UNIT_TOLERANCE {
            return Err(invalid(format!("direction {d:?} is not unit length")));
        }
        Ok(mapping::direction_to_uv(d, self.width(), self.height()))
    }

    /// Unit direction through a continuous pixel coordinate.
    pub fn pixel_to_direction(&self, u: f64, v: f64) -> Result<Vec3> {
        let (w, h) = (self.width() as f64, self.height() as f64);
        if !(0.0..=w).contains(&u) || !(0.0..=h).contains(&v) {
            return Err(invalid(format!("pixel ({u}, {v}) outside {w}x{h}")));
        }
        Ok(mapping::uv_to_direction(u, v, self.width(), self.height()))
    }

    /// Bilinear radiance lookup along a unit direction.
    pub fn radiance(&self, d: Vec3) -> Vec3 {
        mapping::lookup(&self.image, d)
    }
}

/// Everything the renderer needs from one environment map.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvAssets {
    pub sh: ShCoefficients,
    pub prefiltered: PrefilteredEnv,
    pub content_hash: String,
}

impl EnvAssets {
    pub fn build(source: &EnvironmentMap, levels: usize) -> Result<Self> {
        let prefiltered = prefilter_env(source, levels)?;
        Ok(Self {
            sh: sh_project(source),
            prefiltered,
            content_hash: content_hash(source, levels),
        })
    }

    /// The source map (level 0 of the specular chain).
    pub fn source(&self) -> &EnvironmentMap {
        &self.prefiltered.levels()[0]
    }

    pub fn levels(&self) -> usize {
        self.prefiltered.level_count()
    }

    pub fn irradiance(&self, n: Vec3) -> Vec3 {
        self.sh.irradiance(n)
    }

    pub fn specular(&self, r: Vec3, roughness: f64) -> Vec3 {
        prefilter::specular_lookup(&self.prefiltered, r, roughness)
    }
}

/// SHA-256 over the source pixels and every parameter that shapes the
/// derived assets.
pub fn content_hash(source: &EnvironmentMap, levels: usize) -> String {
    let mut hasher = Sha256::new();
    hasher.update(CACHE_VERSION.to_le_bytes());
    hasher.update((source.width() as u64).to_le_bytes());
    hasher.update((source.height() as u64).to_le_bytes());
    hasher.update((levels as u64).to_le_bytes());
    hasher.update((PREFILTER_SAMPLES as u64).to_le_bytes());
    for px in source.image().pixels() {
        for v in px {
            hasher.update(v.to_le_bytes());
        }
    }
    hex::encode(hasher.finalize())
}
