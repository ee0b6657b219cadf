//! Order-2 real spherical harmonics and the irradiance they encode.

use std::f64::consts::PI;

use rayon::prelude::*;

use super::mapping::{texel_solid_angle, uv_to_direction};
use super::EnvironmentMap;
use crate::error::{invalid, Result};
use crate::math::Vec3;

pub const SH_COUNT: usize = 9;

const C0: f64 = 0.282_094_791_773_878_14; // 1 / (2√π)
const C1: f64 = 0.488_602_511_902_919_9; // √3 / (2√π)
const C2: f64 = 1.092_548_430_592_079_2; // √15 / (2√π)
const C3: f64 = 0.315_391_565_252_520_05; // √5 / (4√π)
const C4: f64 = 0.546_274_215_296_039_6; // √15 / (4√π)

/// Clamped-cosine convolution factors per band: π, 2π/3, π/4.
const BAND_FACTOR: [f64; SH_COUNT] = [
    PI,
    2.0 * PI / 3.0,
    2.0 * PI / 3.0,
    2.0 * PI / 3.0,
    PI / 4.0,
    PI / 4.0,
    PI / 4.0,
    PI / 4.0,
    PI / 4.0,
];

/// Basis values ordered (0,0), (1,−1), (1,0), (1,1), (2,−2), (2,−1), (2,0),
/// (2,1), (2,2) in Cartesian form.
pub fn sh_basis(d: Vec3) -> [f64; SH_COUNT] {
    let Vec3 { x, y, z } = d;
    [
        C0,
        C1 * y,
        C1 * z,
        C1 * x,
        C2 * x * y,
        C2 * y * z,
        C3 * (3.0 * z * z - 1.0),
        C2 * x * z,
        C4 * (x * x - y * y),
    ]
}

fn sh_basis_grad(d: Vec3) -> [Vec3; SH_COUNT] {
    let Vec3 { x, y, z } = d;
    [
        Vec3::ZERO,
        Vec3::new(0.0, C1, 0.0),
        Vec3::new(0.0, 0.0, C1),
        Vec3::new(C1, 0.0, 0.0),
        Vec3::new(C2 * y, C2 * x, 0.0),
        Vec3::new(0.0, C2 * z, C2 * y),
        Vec3::new(0.0, 0.0, 6.0 * C3 * z),
        Vec3::new(C2 * z, 0.0, C2 * x),
        Vec3::new(2.0 * C4 * x, -2.0 * C4 * y, 0.0),
    ]
}

/// Nine RGB projection coefficients.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShCoefficients {
    pub coeffs: [[f64; 3]; SH_COUNT],
}

impl ShCoefficients {
    pub fn new(coeffs: [[f64; 3]; SH_COUNT]) -> Result<Self> {
        if coeffs.iter().flatten().any(|c| !c.is_finite()) {
            return Err(invalid("SH coefficients must be finite"));
        }
        Ok(Self { coeffs })
    }

    /// Cosine-convolved irradiance normalized so that a constant
    /// environment of radiance `c` yields `c`.
    pub fn irradiance(&self, n: Vec3) -> Vec3 {
        let y = sh_basis(n);
        (0..SH_COUNT).fold(Vec3::ZERO, |acc, i| {
            acc + Vec3::from_array(self.coeffs[i]) * (BAND_FACTOR[i] / PI * y[i])
        })
    }

    /// Pulls an RGB adjoint on [`Self::irradiance`] back to the normal.
    pub(crate) fn irradiance_vjp(&self, n: Vec3, adjoint: Vec3) -> Vec3 {
        let g = sh_basis_grad(n);
        (0..SH_COUNT).fold(Vec3::ZERO, |acc, i| {
            acc + g[i] * (BAND_FACTOR[i] / PI * adjoint.dot(Vec3::from_array(self.coeffs[i])))
        })
    }
}

/// Projects the map onto the basis by midpoint quadrature over texels.
pub fn sh_project(env: &EnvironmentMap) -> ShCoefficients {
    let img = env.image();
    let (w, h) = img.dims();
    let rows: Vec<[[f64; 3]; SH_COUNT]> = (0..h)
        .into_par_iter()
        .map(|row| {
            let d_omega = texel_solid_angle(row, w, h);
            let mut acc = [[0.0; 3]; SH_COUNT];
            for col in 0..w {
                let d = uv_to_direction(col as f64 + 0.5, row as f64 + 0.5, w, h);
                let y = sh_basis(d);
                let l = img.get(col, row);
                for (a, yi) in acc.iter_mut().zip(y) {
                    for c in 0..3 {
                        a[c] += l[c] * yi * d_omega;
                    }
                }
            }
            acc
        })
        .collect();
    // rows are summed in order for reproducibility
    let mut coeffs = [[0.0; 3]; SH_COUNT];
    for r in rows {
        for (a, b) in coeffs.iter_mut().zip(r) {
            for c in 0..3 {
                a[c] += b[c];
            }
        }
    }
    ShCoefficients { coeffs }
}

/// Diffuse irradiance term for a unit normal.
pub fn sh_eval_irradiance(sh: &ShCoefficients, n: Vec3) -> Result<Vec3> {
    if (n.length() - 1.0).abs() > super::mapping::UNIT_TOLERANCE {
        return Err(invalid(format!("normal {n:?} is not unit length")));
    }
    Ok(sh.irradiance(n))
}
