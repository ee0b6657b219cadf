//! G-buffer interchange as a directory of EXRs.

use std::path::Path;

use super::GBuffer;
use crate::error::{Error, Result};
use crate::imaging::{read_exr, read_exr_scalar, write_exr, write_exr_scalar, LinearImage};
use crate::math::Vec3;

const BASECOLOR: &str = "basecolor.exr";
const NORMAL: &str = "normal.exr";
const ROUGHNESS: &str = "roughness.exr";
const METALLIC: &str = "metallic.exr";
const DEPTH: &str = "depth.exr";

/// Writes `basecolor.exr`, `normal.exr` (remapped `n * 0.5 + 0.5`),
/// `roughness.exr`, `metallic.exr` and `depth.exr` when present.
pub fn write_gbuffer_dir(dir: impl AsRef<Path>, g: &GBuffer) -> Result<()> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir)?;
    let (w, h) = g.dims();
    write_exr(dir.join(BASECOLOR), &LinearImage::new(w, h, g.basecolor.clone())?)?;
    let encoded = g
        .normal
        .iter()
        .map(|n| n.map(|c| (c * 0.5 + 0.5).clamp(0.0, 1.0)))
        .collect();
    write_exr(dir.join(NORMAL), &LinearImage::new(w, h, encoded)?)?;
    write_exr_scalar(dir.join(ROUGHNESS), w, h, &g.roughness)?;
    write_exr_scalar(dir.join(METALLIC), w, h, &g.metallic)?;
    if let Some(depth) = &g.depth {
        write_exr_scalar(dir.join(DEPTH), w, h, depth)?;
    }
    Ok(())
}

fn scalar_plane(path: &Path, dims: (usize, usize)) -> Result<Vec<f64>> {
    let (w, h, values) = read_exr_scalar(path)?;
    if (w, h) != dims {
        return Err(Error::ShapeMismatch {
            expected: dims,
            actual: (w, h),
        });
    }
    Ok(values)
}

/// Reads a G-buffer directory. Normals are decoded and renormalized;
/// roughness is floored at the shading minimum to absorb float storage.
pub fn read_gbuffer_dir(dir: impl AsRef<Path>) -> Result<GBuffer> {
    let dir = dir.as_ref();
    if !dir.is_dir() {
        return Err(Error::MissingFile(dir.to_path_buf()));
    }
    let basecolor = read_exr(dir.join(BASECOLOR))?;
    let dims = basecolor.dims();
    let normal_img = read_exr(dir.join(NORMAL))?;
    if normal_img.dims() != dims {
        return Err(Error::ShapeMismatch {
            expected: dims,
            actual: normal_img.dims(),
        });
    }
    let normal = normal_img
        .pixels()
        .iter()
        .map(|p| Vec3::from_array(p.map(|c| c * 2.0 - 1.0)).normalized().to_array())
        .collect();
    let roughness = scalar_plane(&dir.join(ROUGHNESS), dims)?
        .into_iter()
        .map(|a| a.clamp(super::MIN_ROUGHNESS, 1.0))
        .collect();
    let metallic = scalar_plane(&dir.join(METALLIC), dims)?
        .into_iter()
        .map(|m| m.clamp(0.0, 1.0))
        .collect();
    let depth_path = dir.join(DEPTH);
    let depth = if depth_path.is_file() {
        Some(scalar_plane(&depth_path, dims)?)
    } else {
        None
    };
    let mut g = GBuffer::new(
        dims.0,
        dims.1,
        basecolor.into_pixels().into_iter().map(|c| c.map(|v| v.min(1.0))).collect(),
        normal,
        roughness,
        metallic,
    )?;
    g.depth = depth;
    g.validate()?;
    Ok(g)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn directory_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let n = Vec3::new(0.2, -0.3, 0.9).normalized().to_array();
        let mut g = GBuffer::uniform(3, 2, [0.25, 0.5, 0.75], n, 0.3, 0.6).unwrap();
        g.depth = Some(vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        write_gbuffer_dir(dir.path(), &g).unwrap();
        let back = read_gbuffer_dir(dir.path()).unwrap();
        assert_eq!(back.basecolor, g.basecolor);
        assert_eq!(back.depth, g.depth);
        for (a, b) in back.normal.iter().zip(&g.normal) {
            for c in 0..3 {
                assert!((a[c] - b[c]).abs() < 1e-6);
            }
        }
        for (a, b) in back.roughness.iter().zip(&g.roughness) {
            assert!((a - b).abs() < 1e-7);
        }
    }

    #[test]
    fn missing_plane_reported() {
        let dir = tempfile::tempdir().unwrap();
        let g = GBuffer::uniform(2, 2, [0.5; 3], [0.0, 0.0, 1.0], 0.3, 0.0).unwrap();
        write_gbuffer_dir(dir.path(), &g).unwrap();
        std::fs::remove_file(dir.path().join(METALLIC)).unwrap();
        assert!(matches!(read_gbuffer_dir(dir.path()), Err(Error::MissingFile(_))));
    }
}
