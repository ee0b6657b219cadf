//! Shared scene generators and independent oracles for integration tests.
#![allow(dead_code)]

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use relight::envmap::mapping::{direction_from_angles, texel_solid_angle};
use relight::envmap::{EnvAssets, EnvironmentMap};
use relight::math::Vec3;
use relight::renderer::{shade_pixel, GBuffer, PixelInputs};
use relight::LinearImage;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_unit(rng: &mut ChaCha8Rng) -> Vec3 {
    loop {
        let d = Vec3::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        );
        let l = d.length();
        if l > 1e-3 && l <= 1.0 {
            return d * (1.0 / l);
        }
    }
}

/// Unit vector with `d·axis ≥ min_cos`.
pub fn random_in_cone(rng: &mut ChaCha8Rng, axis: Vec3, min_cos: f64) -> Vec3 {
    loop {
        let d = random_unit(rng);
        if d.dot(axis) >= min_cos {
            return d;
        }
    }
}

/// Outdoor-like map: sky gradient, a few soft lobes and per-texel noise.
pub fn random_env(rng: &mut ChaCha8Rng, w: usize, h: usize) -> EnvironmentMap {
    lobed_env(rng, w, h, 2.0..12.0)
}

/// Like [`random_env`] with lobe exponents drawn from `sharpness`.
pub fn lobed_env(rng: &mut ChaCha8Rng, w: usize, h: usize, sharpness: std::ops::Range<f64>) -> EnvironmentMap {
    let lobes: Vec<(Vec3, f64, [f64; 3])> = (0..3)
        .map(|_| {
            let dir = random_unit(rng);
            let sharp = rng.random_range(sharpness.clone());
            let col = [
                rng.random_range(0.5..3.0),
                rng.random_range(0.5..3.0),
                rng.random_range(0.5..3.0),
            ];
            (dir, sharp, col)
        })
        .collect();
    let sky = [
        rng.random_range(0.1..1.0),
        rng.random_range(0.1..1.0),
        rng.random_range(0.1..1.0),
    ];
    let img = LinearImage::from_fn(w, h, |x, y| {
        let theta = (y as f64 + 0.5) / h as f64 * PI;
        let phi = (x as f64 + 0.5) / w as f64 * 2.0 * PI;
        let d = direction_from_angles(theta, phi);
        let mut px = [0.0; 3];
        for c in 0..3 {
            px[c] = sky[c] * (0.6 + 0.4 * d.y) + rng.random_range(0.0..0.05);
            for (dir, sharp, col) in &lobes {
                px[c] += col[c] * (sharp * (d.dot(*dir) - 1.0)).exp();
            }
        }
        px
    })
    .unwrap();
    EnvironmentMap::new(img).unwrap()
}

/// Map with i.i.d. uniform texels scaled per channel.
pub fn noise_env(rng: &mut ChaCha8Rng, w: usize, h: usize) -> EnvironmentMap {
    let scale = [
        rng.random_range(0.2..2.0),
        rng.random_range(0.2..2.0),
        rng.random_range(0.2..2.0),
    ];
    let img = LinearImage::from_fn(w, h, |_, _| {
        [
            scale[0] * rng.random::<f64>(),
            scale[1] * rng.random::<f64>(),
            scale[2] * rng.random::<f64>(),
        ]
    })
    .unwrap();
    EnvironmentMap::new(img).unwrap()
}

pub fn random_gbuffer(rng: &mut ChaCha8Rng, w: usize, h: usize, view: Vec3) -> GBuffer {
    let n = w * h;
    let mut basecolor = Vec::with_capacity(n);
    let mut normal = Vec::with_capacity(n);
    let mut roughness = Vec::with_capacity(n);
    let mut metallic = Vec::with_capacity(n);
    for _ in 0..n {
        basecolor.push([
            rng.random_range(0.05..0.95),
            rng.random_range(0.05..0.95),
            rng.random_range(0.05..0.95),
        ]);
        normal.push(random_in_cone(rng, view, 0.3).to_array());
        roughness.push(rng.random_range(0.05..0.95));
        metallic.push(rng.random_range(0.0..1.0));
    }
    GBuffer::new(w, h, basecolor, normal, roughness, metallic).unwrap()
}

/// Brute-force cosine-weighted irradiance over every texel, divided by π.
pub fn brute_force_irradiance(env: &EnvironmentMap, n: Vec3) -> [f64; 3] {
    let (w, h) = (env.width(), env.height());
    let mut acc = [0.0; 3];
    for y in 0..h {
        let omega = texel_solid_angle(y, w, h);
        let theta = (y as f64 + 0.5) / h as f64 * PI;
        for x in 0..w {
            let phi = (x as f64 + 0.5) / w as f64 * 2.0 * PI;
            let d = direction_from_angles(theta, phi);
            let cos = n.dot(d);
            if cos > 0.0 {
                let l = env.image().get(x, y);
                for c in 0..3 {
                    acc[c] += l[c] * cos * omega;
                }
            }
        }
    }
    acc.map(|v| v / PI)
}

/// Which G-buffer parameter a finite-difference probe perturbs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Param {
    Basecolor(usize),
    Normal(usize),
    Roughness,
    Metallic,
}

pub const ALL_PARAMS: [Param; 8] = [
    Param::Basecolor(0),
    Param::Basecolor(1),
    Param::Basecolor(2),
    Param::Normal(0),
    Param::Normal(1),
    Param::Normal(2),
    Param::Roughness,
    Param::Metallic,
];

pub fn perturb(p: &PixelInputs, param: Param, delta: f64) -> PixelInputs {
    let mut q = *p;
    match param {
        Param::Basecolor(c) => {
            let mut a = q.basecolor.to_array();
            a[c] += delta;
            q.basecolor = Vec3::from_array(a);
        }
        Param::Normal(c) => {
            let mut a = q.normal.to_array();
            a[c] += delta;
            q.normal = Vec3::from_array(a);
        }
        Param::Roughness => q.roughness += delta,
        Param::Metallic => q.metallic += delta,
    }
    q
}

/// Discrete state of every piecewise branch the shading passes through:
/// clamp signs, facing, mip bracket and bilinear cells at both levels.
pub fn branch_signature(p: &PixelInputs, assets: &EnvAssets) -> Vec<i64> {
    let s = shade_pixel(p, assets);
    let mut sig = vec![s.back_facing as i64];
    let pre = s.diffuse + s.specular;
    for c in 0..3 {
        sig.push((pre[c] > 0.0) as i64);
    }
    if s.back_facing {
        return sig;
    }
    let n = p.normal.normalized();
    let r = n * (2.0 * n.dot(p.view)) - p.view;
    let levels = assets.levels();
    let pos = p.roughness.clamp(0.0, 1.0) * (levels - 1) as f64;
    let l0 = (pos.ceil() as usize).saturating_sub(1).min(levels - 2);
    sig.push(l0 as i64);
    for l in [l0, l0 + 1] {
        let map = &assets.prefiltered.levels()[l];
        let (u, v) = map.direction_to_pixel(r.normalized()).unwrap();
        let max_y = (map.height() - 1) as f64;
        sig.push((u - 0.5).floor() as i64);
        sig.push((v - 0.5).clamp(0.0, max_y).floor() as i64);
        sig.push(((v - 0.5) <= 0.0) as i64 + 2 * ((v - 0.5) >= max_y) as i64);
    }
    sig
}

/// Central difference of `Σ adjoint · L_o` at one pixel, or `None` when the
/// probe straddles a branch change.
pub fn central_difference(
    p: &PixelInputs,
    assets: &EnvAssets,
    adjoint: Vec3,
    param: Param,
    step: f64,
) -> Option<f64> {
    let sig = branch_signature(p, assets);
    for k in [-2.0, -1.0, 1.0, 2.0] {
        if branch_signature(&perturb(p, param, k * step), assets) != sig {
            return None;
        }
    }
    let f = |q: &PixelInputs| shade_pixel(q, assets).radiance.dot(adjoint);
    Some((f(&perturb(p, param, step)) - f(&perturb(p, param, -step))) / (2.0 * step))
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6)
}

pub fn time<T>(f: impl FnOnce() -> T) -> (T, std::time::Duration) {
    let t0 = std::time::Instant::now();
    let out = f();
    (out, t0.elapsed())
}
