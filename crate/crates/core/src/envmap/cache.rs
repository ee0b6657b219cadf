//! Versioned binary sidecar for [`EnvAssets`], keyed by content hash.
//!
//! Layout (little endian): magic `RLENVAS\0`, `u32` version, 64-byte ASCII
//! hex hash, `u32` level count, `u32` sample count, 27 `f64` SH values, then
//! per level `u32` width, `u32` height and `width * height * 3` `f64`.

use std::path::{Path, PathBuf};

use super::{content_hash, EnvAssets, EnvironmentMap, PrefilteredEnv, ShCoefficients, PREFILTER_SAMPLES, SH_COUNT};
use crate::error::{Error, Result};
use crate::imaging::LinearImage;

pub const CACHE_VERSION: u32 = 1;
const MAGIC: &[u8; 8] = b"RLENVAS\0";

pub fn cache_file_name(hash: &str) -> String {
    format!("{hash}.envassets")
}

pub fn encode_assets(assets: &EnvAssets) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&CACHE_VERSION.to_le_bytes());
    out.extend_from_slice(assets.content_hash.as_bytes());
    out.extend_from_slice(&(assets.levels() as u32).to_le_bytes());
    out.extend_from_slice(&(PREFILTER_SAMPLES as u32).to_le_bytes());
    for c in assets.sh.coeffs.iter().flatten() {
        out.extend_from_slice(&c.to_le_bytes());
    }
    for level in assets.prefiltered.levels() {
        out.extend_from_slice(&(level.width() as u32).to_le_bytes());
        out.extend_from_slice(&(level.height() as u32).to_le_bytes());
        for v in level.image().pixels().iter().flatten() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Option<&'a [u8]> {
        let s = self.bytes.get(self.pos..self.pos + n)?;
        self.pos += n;
        Some(s)
    }

    fn u32(&mut self) -> Option<u32> {
        Some(u32::from_le_bytes(self.take(4)?.try_into().ok()?))
    }

    fn f64(&mut self) -> Option<f64> {
        Some(f64::from_le_bytes(self.take(8)?.try_into().ok()?))
    }
}

pub fn decode_assets(bytes: &[u8], path: &Path) -> Result<EnvAssets> {
    let bad = |reason: &str| Error::Malformed {
        path: path.to_path_buf(),
        reason: reason.to_string(),
    };
    let mut cur = Cursor { bytes, pos: 0 };
    if cur.take(8) != Some(MAGIC.as_slice()) {
        return Err(bad("not an environment asset cache"));
    }
    let version = cur.u32().ok_or_else(|| bad("truncated header"))?;
    if version != CACHE_VERSION {
        return Err(bad(&format!("cache version {version}, expected {CACHE_VERSION}")));
    }
    let hash = cur
        .take(64)
        .and_then(|h| std::str::from_utf8(h).ok())
        .ok_or_else(|| bad("truncated hash"))?
        .to_string();
    let levels = cur.u32().ok_or_else(|| bad("truncated header"))? as usize;
    let samples = cur.u32().ok_or_else(|| bad("truncated header"))? as usize;
    if samples != PREFILTER_SAMPLES {
        return Err(bad("prefilter sample count differs from this build"));
    }
    let mut coeffs = [[0.0; 3]; SH_COUNT];
    for v in coeffs.iter_mut().flatten() {
        *v = cur.f64().ok_or_else(|| bad("truncated SH block"))?;
    }
    let mut chain = Vec::with_capacity(levels);
    for _ in 0..levels {
        let w = cur.u32().ok_or_else(|| bad("truncated level header"))? as usize;
        let h = cur.u32().ok_or_else(|| bad("truncated level header"))? as usize;
        let data = (0..w * h)
            .map(|_| Some([cur.f64()?, cur.f64()?, cur.f64()?]))
            .collect::<Option<Vec<_>>>()
            .ok_or_else(|| bad("truncated level data"))?;
        chain.push(EnvironmentMap::new(LinearImage::new(w, h, data)?)?);
    }
    if cur.pos != bytes.len() {
        return Err(bad("trailing bytes"));
    }
    if chain.is_empty() || content_hash(&chain[0], levels) != hash {
        return Err(bad("content hash does not match the stored source"));
    }
    Ok(EnvAssets {
        sh: ShCoefficients::new(coeffs)?,
        prefiltered: PrefilteredEnv::from_levels(chain)?,
        content_hash: hash,
    })
}

pub fn save_assets(path: impl AsRef<Path>, assets: &EnvAssets) -> Result<()> {
    std::fs::write(path, encode_assets(assets))?;
    Ok(())
}

pub fn load_assets(path: impl AsRef<Path>) -> Result<EnvAssets> {
    let path = path.as_ref();
    if !path.is_file() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    decode_assets(&std::fs::read(path)?, path)
}

/// Loads `<dir>/<hash>.envassets` when present, otherwise builds the assets
/// and stores them there. The flag reports a cache hit.
pub fn cached_assets(source: &EnvironmentMap, levels: usize, dir: impl AsRef<Path>) -> Result<(EnvAssets, PathBuf, bool)> {
    let dir = dir.as_ref();
    let path = dir.join(cache_file_name(&content_hash(source, levels)));
    if path.is_file() {
        return Ok((load_assets(&path)?, path, true));
    }
    let assets = EnvAssets::build(source, levels)?;
    std::fs::create_dir_all(dir)?;
    // Write-then-rename so concurrent builders never expose a partial file.
    let tmp = path.with_extension(format!("tmp{}", std::process::id()));
    save_assets(&tmp, &assets)?;
    std::fs::rename(&tmp, &path)?;
    Ok((assets, path, false))
}
