//! Roughness-indexed specular mip chain and its trilinear lookup.
//!
//! Level `ℓ` of an `L`-level chain stores the source convolved with a GGX
//! lobe of roughness `ℓ / (L − 1)` (distribution width `roughness²`),
//! estimated with a fixed Hammersley set per texel. Samples read a
//! solid-angle-weighted box pyramid of the source at a footprint matched to
//! the sample density, which keeps isolated bright texels from aliasing.

use std::f64::consts::PI;

use rayon::prelude::*;

use super::mapping::{bilinear, lookup, lookup_vjp, uv_to_direction, UNIT_TOLERANCE};
use super::EnvironmentMap;
use crate::error::{invalid, Result};
use crate::imaging::LinearImage;
use crate::math::Vec3;

pub const PREFILTER_SAMPLES: usize = 256;

#[derive(Debug, Clone, PartialEq)]
pub struct PrefilteredEnv {
    levels: Vec<EnvironmentMap>,
}

impl PrefilteredEnv {
    pub(crate) fn from_levels(levels: Vec<EnvironmentMap>) -> Result<Self> {
        if levels.len() < 2 {
            return Err(invalid("a prefiltered chain needs at least 2 levels"));
        }
        for pair in levels.windows(2) {
            if pair[1].height() > pair[0].height() {
                return Err(invalid("mip resolutions must not grow"));
            }
        }
        Ok(Self { levels })
    }

    pub fn levels(&self) -> &[EnvironmentMap] {
        &self.levels
    }

    pub fn level_count(&self) -> usize {
        self.levels.len()
    }

    pub fn roughness_of_level(&self, level: usize) -> f64 {
        level as f64 / (self.levels.len() - 1) as f64
    }
}

fn hammersley(i: u32, n: u32) -> (f64, f64) {
    (i as f64 / n as f64, i.reverse_bits() as f64 / 4_294_967_296.0)
}

fn tangent_frame(n: Vec3) -> (Vec3, Vec3) {
    let up = if n.y.abs() < 0.999 {
        Vec3::new(0.0, 1.0, 0.0)
    } else {
        Vec3::new(1.0, 0.0, 0.0)
    };
    let t = up.cross(n).normalized();
    (t, n.cross(t))
}

fn level_dims(source_height: usize, level: usize) -> (usize, usize) {
    let h = (source_height >> level).max(1);
    (2 * h, h)
}

/// Box pyramid where each coarse texel is the solid-angle-weighted mean of
/// its 2×2 children.
fn box_pyramid(source: &LinearImage) -> Vec<LinearImage> {
    let mut out = vec![source.clone()];
    loop {
        let fine = out.last().unwrap();
        let (fw, fh) = fine.dims();
        if fh < 2 || fh % 2 != 0 {
            break;
        }
        let (cw, ch) = (fw / 2, fh / 2);
        let row_weight = |r: usize| ((r as f64 + 0.5) / fh as f64 * PI).sin();
        let coarse = LinearImage::from_fn(cw, ch, |x, y| {
            let mut acc = Vec3::ZERO;
            let mut wsum = 0.0;
            for dy in 0..2 {
                let w = row_weight(2 * y + dy);
                for dx in 0..2 {
                    acc += Vec3::from_array(fine.get(2 * x + dx, 2 * y + dy)) * w;
                    wsum += w;
                }
            }
            (acc * (1.0 / wsum)).to_array()
        })
        .expect("weighted means of valid radiance stay valid");
        out.push(coarse);
    }
    out
}

fn pyramid_lookup(pyramid: &[LinearImage], d: Vec3, lod: f64) -> Vec3 {
    let top = (pyramid.len() - 1) as f64;
    let lod = lod.clamp(0.0, top);
    let l0 = lod.floor() as usize;
    let t = lod - l0 as f64;
    let a = lookup(&pyramid[l0], d);
    if t == 0.0 {
        return a;
    }
    a * (1.0 - t) + lookup(&pyramid[l0 + 1], d) * t
}

fn filter_texel(pyramid: &[LinearImage], n: Vec3, roughness: f64) -> Vec3 {
    let (src_w, src_h) = pyramid[0].dims();
    let texel_omega = 4.0 * PI / (src_w * src_h) as f64;
    let a = roughness * roughness;
    let a2 = a * a;
    let (t, b) = tangent_frame(n);
    let mut acc = Vec3::ZERO;
    let mut wsum = 0.0;
    for i in 0..PREFILTER_SAMPLES as u32 {
        let (u1, u2) = hammersley(i, PREFILTER_SAMPLES as u32);
        let phi = 2.0 * PI * u1;
        let cos2 = (1.0 - u2) / (1.0 + (a2 - 1.0) * u2);
        let cos_t = cos2.sqrt();
        let sin_t = (1.0 - cos2).max(0.0).sqrt();
        let h = t * (sin_t * phi.cos()) + b * (sin_t * phi.sin()) + n * cos_t;
        let l = h * (2.0 * n.dot(h)) - n;
        let ndl = n.dot(l);
        if ndl <= 0.0 {
            continue;
        }
        // With N = V the reflected-direction pdf is D(h) / 4.
        let denom = cos2 * (a2 - 1.0) + 1.0;
        let pdf = a2 / (PI * denom * denom) / 4.0;
        let sample_omega = 1.0 / (PREFILTER_SAMPLES as f64 * pdf);
        let lod = 0.5 * (sample_omega / texel_omega).log2() + 1.0;
        acc += pyramid_lookup(pyramid, l.normalized(), lod) * ndl;
        wsum += ndl;
    }
    acc * (1.0 / wsum)
}

/// Builds the roughness mip chain; level 0 is an exact copy of the source.
pub fn prefilter_env(env: &EnvironmentMap, levels: usize) -> Result<PrefilteredEnv> {
    if levels < 2 {
        return Err(invalid(format!("need at least 2 prefilter levels, got {levels}")));
    }
    if levels > usize::BITS as usize || env.height() < (1usize << (levels - 1)) {
        return Err(invalid(format!(
            "environment height {} is too small for {levels} levels",
            env.height()
        )));
    }
    let pyramid = box_pyramid(env.image());
    let mut chain = vec![env.clone()];
    for level in 1..levels {
        let roughness = level as f64 / (levels - 1) as f64;
        let (w, h) = level_dims(env.height(), level);
        let data: Vec<[f64; 3]> = (0..w * h)
            .into_par_iter()
            .map(|i| {
                let d = uv_to_direction((i % w) as f64 + 0.5, (i / w) as f64 + 0.5, w, h);
                filter_texel(&pyramid, d, roughness).to_array()
            })
            .collect();
        chain.push(EnvironmentMap::new(LinearImage::new(w, h, data)?)?);
    }
    PrefilteredEnv::from_levels(chain)
}

/// Lower level index and blend weight for a roughness; integer breakpoints
/// resolve to the segment below so derivatives there are one-sided.
fn level_bracket(roughness: f64, level_count: usize) -> (usize, f64) {
    let pos = roughness.clamp(0.0, 1.0) * (level_count - 1) as f64;
    let l0 = (pos.ceil() as usize).saturating_sub(1).min(level_count - 2);
    (l0, pos - l0 as f64)
}

pub(crate) fn specular_lookup(pre: &PrefilteredEnv, r: Vec3, roughness: f64) -> Vec3 {
    let (l0, t) = level_bracket(roughness, pre.level_count());
    let a = lookup(pre.levels[l0].image(), r);
    let b = lookup(pre.levels[l0 + 1].image(), r);
    a * (1.0 - t) + b * t
}

/// Returns `(value, ∂/∂r · adjoint, ∂/∂roughness · adjoint)`.
pub(crate) fn specular_vjp(
    pre: &PrefilteredEnv,
    r: Vec3,
    roughness: f64,
    adjoint: Vec3,
) -> (Vec3, Vec3, f64) {
    let (l0, t) = level_bracket(roughness, pre.level_count());
    let (a, ga) = lookup_vjp(pre.levels[l0].image(), r, adjoint * (1.0 - t));
    let (b, gb) = lookup_vjp(pre.levels[l0 + 1].image(), r, adjoint * t);
    let value = a * (1.0 - t) + b * t;
    let d_rough = if (0.0..=1.0).contains(&roughness) {
        adjoint.dot(b - a) * (pre.level_count() - 1) as f64
    } else {
        0.0
    };
    (value, ga + gb, d_rough)
}

/// Trilinear lookup: bilinear within the two levels bracketing
/// `roughness · (L − 1)`, linear across them.
pub fn sample_specular(pre: &PrefilteredEnv, r: Vec3, roughness: f64) -> Result<Vec3> {
    if (r.length() - 1.0).abs() > UNIT_TOLERANCE {
        return Err(invalid(format!("reflection direction {r:?} is not unit length")));
    }
    if !(0.0..=1.0).contains(&roughness) {
        return Err(invalid(format!("roughness {roughness} outside [0, 1]")));
    }
    Ok(specular_lookup(pre, r, roughness))
}

/// Bilinear lookup of level 0 at a continuous pixel position.
pub fn level0_bilinear(pre: &PrefilteredEnv, u: f64, v: f64) -> Vec3 {
    bilinear(pre.levels[0].image(), u, v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envmap::mapping::{direction_to_uv, texel_solid_angle};

    fn constant_env(w: usize, h: usize, c: f64) -> EnvironmentMap {
        EnvironmentMap::new(LinearImage::filled(w, h, [c; 3]).unwrap()).unwrap()
    }

    #[test]
    fn bracket_arithmetic() {
        assert_eq!(level_bracket(0.0, 3), (0, 0.0));
        assert_eq!(level_bracket(0.5, 3), (0, 1.0));
        assert_eq!(level_bracket(1.0, 3), (1, 1.0));
        let (l, t) = level_bracket(0.75, 3);
        assert_eq!(l, 1);
        assert!((t - 0.5).abs() < 1e-15);
    }

    #[test]
    fn constant_environment_stays_constant() {
        let pre = prefilter_env(&constant_env(32, 16, 1.7), 4).unwrap();
        for level in pre.levels() {
            for v in level.image().pixels().iter().flatten() {
                assert!((v / 1.7 - 1.0).abs() < 1e-3, "{v}");
            }
        }
        let r = Vec3::new(0.2, 0.7, -0.4).normalized();
        for k in 0..=10 {
            let s = sample_specular(&pre, r, k as f64 / 10.0).unwrap();
            assert!((s.x / 1.7 - 1.0).abs() < 1e-3);
        }
    }

    #[test]
    fn level_zero_is_copy_and_roughness_zero_is_bilinear() {
        let img = LinearImage::from_fn(32, 16, |x, y| [x as f64, y as f64, (x * y) as f64]).unwrap();
        let env = EnvironmentMap::new(img.clone()).unwrap();
        let pre = prefilter_env(&env, 3).unwrap();
        assert_eq!(pre.levels()[0].image(), &img);
        let r = Vec3::new(0.3, -0.2, 0.9).normalized();
        let (u, v) = direction_to_uv(r, 32, 16);
        assert_eq!(sample_specular(&pre, r, 0.0).unwrap(), level0_bilinear(&pre, u, v));
        let mid = sample_specular(&pre, r, 0.5).unwrap();
        let (u1, v1) = direction_to_uv(r, 16, 8);
        assert_eq!(mid, bilinear(pre.levels()[1].image(), u1, v1));
    }

    #[test]
    fn resolution_and_level_checks() {
        let env = constant_env(8, 4, 1.0);
        assert!(prefilter_env(&env, 1).is_err());
        assert!(prefilter_env(&env, 4).is_err());
        assert!(prefilter_env(&env, 3).is_ok());
        let pre = prefilter_env(&env, 3).unwrap();
        assert!(sample_specular(&pre, Vec3::new(0.0, 0.5, 0.0), 0.5).is_err());
        assert!(sample_specular(&pre, Vec3::new(0.0, 1.0, 0.0), 1.5).is_err());
    }

    fn weighted_sum(img: &LinearImage) -> f64 {
        let (w, h) = img.dims();
        (0..h)
            .map(|y| {
                let omega = texel_solid_angle(y, w, h);
                (0..w).map(|x| img.get(x, y)[0] * omega).sum::<f64>()
            })
            .sum()
    }

    #[test]
    fn single_bright_texel_energy_per_level() {
        let (w, h) = (64, 32);
        let mut px = vec![[0.0; 3]; w * h];
        px[10 * w + 20] = [1000.0; 3];
        let env = EnvironmentMap::new(LinearImage::new(w, h, px).unwrap()).unwrap();
        let pre = prefilter_env(&env, 4).unwrap();
        let reference = weighted_sum(env.image());
        for (l, level) in pre.levels().iter().enumerate() {
            let s = weighted_sum(level.image());
            let rel = (s / reference - 1.0).abs();
            assert!(rel < 0.03, "level {l}: {s} vs {reference} ({rel})");
        }
    }
}
