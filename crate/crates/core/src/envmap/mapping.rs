//! Equirectangular coordinate convention.
//!
//! +Y is up. Polar angle θ ∈ [0, π] is measured from +Y and runs down the
//! rows; azimuth φ ∈ [0, 2π) is measured from +X toward +Z and runs across
//! the columns. Continuous pixel coordinates `(u, v)` span `[0, W) × [0, H]`
//! with texel centers at half-integers.

use std::f64::consts::{PI, TAU};

use crate::imaging::LinearImage;
use crate::math::Vec3;

pub(crate) const UNIT_TOLERANCE: f64 = 1e-6;

pub fn direction_from_angles(theta: f64, phi: f64) -> Vec3 {
    let s = theta.sin();
    Vec3::new(s * phi.cos(), theta.cos(), s * phi.sin())
}

/// `(θ, φ)` of a unit direction, φ wrapped into `[0, 2π)`.
pub fn angles_from_direction(d: Vec3) -> (f64, f64) {
    let theta = d.y.clamp(-1.0, 1.0).acos();
    let mut phi = d.z.atan2(d.x);
    if phi < 0.0 {
        phi += TAU;
    }
    if phi >= TAU {
        phi -= TAU;
    }
    (theta, phi)
}

pub(crate) fn direction_to_uv(d: Vec3, width: usize, height: usize) -> (f64, f64) {
    let (theta, phi) = angles_from_direction(d);
    let mut u = phi / TAU * width as f64;
    if u >= width as f64 {
        u -= width as f64;
    }
    (u, theta / PI * height as f64)
}

pub(crate) fn uv_to_direction(u: f64, v: f64, width: usize, height: usize) -> Vec3 {
    direction_from_angles(v / height as f64 * PI, u / width as f64 * TAU)
}

/// Jacobian rows `(∂u/∂d, ∂v/∂d)` of [`direction_to_uv`] at a unit direction.
pub(crate) fn direction_to_uv_jacobian(d: Vec3, width: usize, height: usize) -> (Vec3, Vec3) {
    let rho2 = d.x * d.x + d.z * d.z;
    if rho2 < 1e-24 {
        return (Vec3::ZERO, Vec3::ZERO);
    }
    let du = Vec3::new(-d.z / rho2, 0.0, d.x / rho2) * (width as f64 / TAU);
    let dv = Vec3::new(0.0, -1.0 / rho2.sqrt(), 0.0) * (height as f64 / PI);
    (du, dv)
}

/// Solid angle of a texel in row `row`, `(2π/W)(π/H) sin θ` at the row center.
pub fn texel_solid_angle(row: usize, width: usize, height: usize) -> f64 {
    let theta = (row as f64 + 0.5) / height as f64 * PI;
    (TAU / width as f64) * (PI / height as f64) * theta.sin()
}

/// Bilinear footprint of a continuous lookup: four texel indices and weights,
/// plus the partial derivatives of the weights with respect to `u` and `v`.
struct Footprint {
    idx: [usize; 4],
    w: [f64; 4],
    dw_du: [f64; 4],
    dw_dv: [f64; 4],
}

fn footprint(u: f64, v: f64, width: usize, height: usize) -> Footprint {
    let x = u - 0.5;
    let x0 = x.floor();
    let fx = x - x0;
    let ix0 = (x0 as i64).rem_euclid(width as i64) as usize;
    let ix1 = (ix0 + 1) % width;

    let (iy0, iy1, fy, dy_live) = if height == 1 {
        (0, 0, 0.0, false)
    } else {
        let y = v - 0.5;
        let max_y = (height - 1) as f64;
        if y <= 0.0 {
            (0, 1, 0.0, false)
        } else if y >= max_y {
            (height - 2, height - 1, 1.0, false)
        } else {
            let y0 = (y.floor() as usize).min(height - 2);
            (y0, y0 + 1, y - y0 as f64, true)
        }
    };
    let gy = if dy_live { 1.0 } else { 0.0 };
    Footprint {
        idx: [
            iy0 * width + ix0,
            iy0 * width + ix1,
            iy1 * width + ix0,
            iy1 * width + ix1,
        ],
        w: [
            (1.0 - fx) * (1.0 - fy),
            fx * (1.0 - fy),
            (1.0 - fx) * fy,
            fx * fy,
        ],
        dw_du: [-(1.0 - fy), 1.0 - fy, -fy, fy],
        dw_dv: [-(1.0 - fx) * gy, -fx * gy, (1.0 - fx) * gy, fx * gy],
    }
}

/// Bilinear lookup with horizontal wrap and vertical clamp.
pub(crate) fn bilinear(image: &LinearImage, u: f64, v: f64) -> Vec3 {
    let fp = footprint(u, v, image.width(), image.height());
    let px = image.pixels();
    fp.idx
        .iter()
        .zip(fp.w)
        .fold(Vec3::ZERO, |acc, (i, w)| acc + Vec3::from_array(px[*i]) * w)
}

/// Bilinear lookup returning `(value, ∂value/∂u, ∂value/∂v)`.
pub(crate) fn bilinear_with_grad(image: &LinearImage, u: f64, v: f64) -> (Vec3, Vec3, Vec3) {
    let fp = footprint(u, v, image.width(), image.height());
    let px = image.pixels();
    let mut out = (Vec3::ZERO, Vec3::ZERO, Vec3::ZERO);
    for k in 0..4 {
        let p = Vec3::from_array(px[fp.idx[k]]);
        out.0 += p * fp.w[k];
        out.1 += p * fp.dw_du[k];
        out.2 += p * fp.dw_dv[k];
    }
    out
}

/// Bilinear lookup along a unit direction.
pub(crate) fn lookup(image: &LinearImage, d: Vec3) -> Vec3 {
    let (u, v) = direction_to_uv(d, image.width(), image.height());
    bilinear(image, u, v)
}

/// Value and vector-Jacobian product of [`lookup`] for an RGB adjoint.
pub(crate) fn lookup_vjp(image: &LinearImage, d: Vec3, adjoint: Vec3) -> (Vec3, Vec3) {
    let (w, h) = image.dims();
    let (u, v) = direction_to_uv(d, w, h);
    let (value, dval_du, dval_dv) = bilinear_with_grad(image, u, v);
    let (du, dv) = direction_to_uv_jacobian(d, w, h);
    let grad = du * adjoint.dot(dval_du) + dv * adjoint.dot(dval_dv);
    (value, grad)
}
