//! Per-pixel split-sum Cook–Torrance shading and its reverse-mode adjoint.

use crate::envmap::prefilter::specular_vjp;
use crate::envmap::EnvAssets;
use crate::math::{normalize_vjp, Vec3};

/// Dielectric specular reflectance at normal incidence.
pub const DIELECTRIC_F0: f64 = 0.04;

/// Inputs for one pixel. `normal` may be unnormalized; shading uses its
/// direction and gradients are taken with respect to the raw vector.
#[derive(Debug, Clone, Copy)]
pub struct PixelInputs {
    pub basecolor: Vec3,
    pub normal: Vec3,
    pub roughness: f64,
    pub metallic: f64,
    pub view: Vec3,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PixelShading {
    pub diffuse: Vec3,
    pub specular: Vec3,
    /// `max(diffuse + specular, 0)` per channel.
    pub radiance: Vec3,
    pub back_facing: bool,
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PixelGradient {
    pub basecolor: Vec3,
    pub normal: Vec3,
    pub roughness: f64,
    pub metallic: f64,
}

pub fn base_reflectance(basecolor: Vec3, metallic: f64) -> Vec3 {
    Vec3::splat(DIELECTRIC_F0) + (basecolor - Vec3::splat(DIELECTRIC_F0)) * metallic
}

pub(crate) fn schlick(ndotv: f64, f0: Vec3) -> Vec3 {
    let s = (1.0 - ndotv).powi(5);
    f0 + (Vec3::splat(1.0) - f0) * s
}

struct Forward {
    n: Vec3,
    ndv: f64,
    s: f64,
    f0: Vec3,
    fresnel: Vec3,
    irradiance: Vec3,
    r: Vec3,
    shading: PixelShading,
}

fn forward(p: &PixelInputs, assets: &EnvAssets) -> Option<Forward> {
    let n = p.normal.normalized();
    let ndv = n.dot(p.view);
    if ndv.is_nan() || ndv <= 0.0 {
        return None;
    }
    let ndv = ndv.min(1.0);
    let s = (1.0 - ndv).powi(5);
    let f0 = base_reflectance(p.basecolor, p.metallic);
    let fresnel = schlick(ndv, f0);
    let irradiance = assets.irradiance(n);
    let diffuse = (Vec3::splat(1.0) - fresnel).hadamard(p.basecolor).hadamard(irradiance)
        * (1.0 - p.metallic);
    let r = n * (2.0 * ndv) - p.view;
    let specular = fresnel.hadamard(assets.specular(r, p.roughness));
    let radiance = (diffuse + specular).map(|c| c.max(0.0));
    Some(Forward {
        n,
        ndv,
        s,
        f0,
        fresnel,
        irradiance,
        r,
        shading: PixelShading {
            diffuse,
            specular,
            radiance,
            back_facing: false,
        },
    })
}

/// Shades one pixel. Back-facing pixels (`n·v ≤ 0`) are black.
pub fn shade_pixel(p: &PixelInputs, assets: &EnvAssets) -> PixelShading {
    forward(p, assets).map(|f| f.shading).unwrap_or(PixelShading {
        diffuse: Vec3::ZERO,
        specular: Vec3::ZERO,
        radiance: Vec3::ZERO,
        back_facing: true,
    })
}

/// Pulls an RGB adjoint on the clamped radiance back to the pixel inputs.
/// Clamped channels contribute a zero subgradient.
pub fn shade_pixel_vjp(p: &PixelInputs, assets: &EnvAssets, adjoint: Vec3) -> PixelGradient {
    let Some(f) = forward(p, assets) else {
        return PixelGradient::default();
    };
    let pre = f.shading.diffuse + f.shading.specular;
    let a = Vec3::new(
        if pre.x > 0.0 { adjoint.x } else { 0.0 },
        if pre.y > 0.0 { adjoint.y } else { 0.0 },
        if pre.z > 0.0 { adjoint.z } else { 0.0 },
    );
    let m = p.metallic;
    let cb = p.basecolor;
    let one_minus_f = Vec3::splat(1.0) - f.fresnel;

    let (specular_env, grad_r, grad_rough) = specular_vjp(
        &assets.prefiltered,
        f.r,
        p.roughness,
        a.hadamard(f.fresnel),
    );
    // adjoint of the Fresnel term through both lobes
    let grad_f = a.hadamard(specular_env - cb.hadamard(f.irradiance) * (1.0 - m));
    let grad_f0 = grad_f * (1.0 - f.s);

    let grad_cb = a.hadamard(one_minus_f).hadamard(f.irradiance) * (1.0 - m) + grad_f0 * m;
    let grad_m = -a.hadamard(one_minus_f).hadamard(cb).hadamard(f.irradiance).sum()
        + grad_f0.dot(cb - Vec3::splat(DIELECTRIC_F0));

    let grad_s = grad_f.dot(Vec3::splat(1.0) - f.f0);
    let mut grad_ndv = grad_s * (-5.0 * (1.0 - f.ndv).powi(4));

    let grad_irr = a.hadamard(one_minus_f).hadamard(cb) * (1.0 - m);
    let mut grad_n = assets.sh.irradiance_vjp(f.n, grad_irr);
    // r = 2 (n·v) n − v
    grad_n += grad_r * (2.0 * f.ndv);
    grad_ndv += 2.0 * f.n.dot(grad_r);
    grad_n += p.view * grad_ndv;

    PixelGradient {
        basecolor: grad_cb,
        normal: normalize_vjp(p.normal, grad_n),
        roughness: grad_rough,
        metallic: grad_m,
    }
}
