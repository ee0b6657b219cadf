//! Differentiable split-sum renderer over per-pixel G-buffers.

mod io;
pub mod shading;

pub use io::{read_gbuffer_dir, write_gbuffer_dir};
pub use shading::{
    base_reflectance, shade_pixel, shade_pixel_vjp, PixelGradient, PixelInputs, PixelShading,
    DIELECTRIC_F0,
};

use rayon::prelude::*;

use crate::envmap::EnvAssets;
use crate::error::{invalid, Error, Result};
use crate::imaging::{LinearImage, Mask};
use crate::math::Vec3;

pub const MIN_ROUGHNESS: f64 = 0.01;
const UNIT_TOLERANCE: f64 = 1e-4;

/// Per-pixel intrinsic scene description.
#[derive(Debug, Clone, PartialEq)]
pub struct GBuffer {
    pub width: usize,
    pub height: usize,
    pub basecolor: Vec<[f64; 3]>,
    pub normal: Vec<[f64; 3]>,
    pub roughness: Vec<f64>,
    pub metallic: Vec<f64>,
    /// Carried through I/O untouched; shading never reads it.
    pub depth: Option<Vec<f64>>,
}

impl GBuffer {
    pub fn new(
        width: usize,
        height: usize,
        basecolor: Vec<[f64; 3]>,
        normal: Vec<[f64; 3]>,
        roughness: Vec<f64>,
        metallic: Vec<f64>,
    ) -> Result<Self> {
        let g = Self {
            width,
            height,
            basecolor,
            normal,
            roughness,
            metallic,
            depth: None,
        };
        g.validate()?;
        Ok(g)
    }

    /// Same value at every pixel.
    pub fn uniform(
        width: usize,
        height: usize,
        basecolor: [f64; 3],
        normal: [f64; 3],
        roughness: f64,
        metallic: f64,
    ) -> Result<Self> {
        let n = width * height;
        Self::new(
            width,
            height,
            vec![basecolor; n],
            vec![normal; n],
            vec![roughness; n],
            vec![metallic; n],
        )
    }

    pub fn len(&self) -> usize {
        self.width * self.height
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.len();
        if n == 0 {
            return Err(invalid("G-buffer must be at least 1x1"));
        }
        if self.basecolor.len() != n
            || self.normal.len() != n
            || self.roughness.len() != n
            || self.metallic.len() != n
            || self.depth.as_ref().is_some_and(|d| d.len() != n)
        {
            return Err(invalid("G-buffer planes disagree in size"));
        }
        for i in 0..n {
            let cb = self.basecolor[i];
            if cb.iter().any(|c| !(0.0..=1.0).contains(c)) {
                return Err(invalid(format!("basecolor {cb:?} at pixel {i} outside [0, 1]")));
            }
            let nrm = Vec3::from_array(self.normal[i]);
            if !nrm.is_finite() || (nrm.length() - 1.0).abs() > UNIT_TOLERANCE {
                return Err(invalid(format!("normal {nrm:?} at pixel {i} is not unit length")));
            }
            let a = self.roughness[i];
            if !(MIN_ROUGHNESS..=1.0).contains(&a) {
                return Err(invalid(format!("roughness {a} at pixel {i} outside [0.01, 1]")));
            }
            let m = self.metallic[i];
            if !(0.0..=1.0).contains(&m) {
                return Err(invalid(format!("metallic {m} at pixel {i} outside [0, 1]")));
            }
        }
        Ok(())
    }

    pub(crate) fn pixel(&self, i: usize, view: Vec3) -> PixelInputs {
        PixelInputs {
            basecolor: Vec3::from_array(self.basecolor[i]),
            normal: Vec3::from_array(self.normal[i]),
            roughness: self.roughness[i],
            metallic: self.metallic[i],
            view,
        }
    }
}

/// Per-pixel unit direction toward the camera.
#[derive(Debug, Clone, PartialEq)]
pub struct ViewSetup {
    width: usize,
    height: usize,
    directions: Vec<[f64; 3]>,
}

impl ViewSetup {
    pub fn new(width: usize, height: usize, directions: Vec<[f64; 3]>) -> Result<Self> {
        if directions.len() != width * height {
            return Err(invalid("view direction count does not match the image"));
        }
        if let Some(d) = directions
            .iter()
            .find(|d| (Vec3::from_array(**d).length() - 1.0).abs() > UNIT_TOLERANCE)
        {
            return Err(invalid(format!("view direction {d:?} is not unit length")));
        }
        Ok(Self {
            width,
            height,
            directions,
        })
    }

    /// One direction for every pixel.
    pub fn shared(width: usize, height: usize, direction: [f64; 3]) -> Result<Self> {
        Self::new(width, height, vec![direction; width * height])
    }

    /// Orthographic default: every pixel sees the camera along +Z.
    pub fn default_for(width: usize, height: usize) -> Self {
        Self::shared(width, height, [0.0, 0.0, 1.0]).expect("+Z is unit length")
    }

    /// Pinhole camera at the origin looking down −Z with image rows running
    /// toward −Y; `v` points from the surface back along each pixel ray.
    pub fn pinhole(width: usize, height: usize, focal: f64, principal: [f64; 2]) -> Result<Self> {
        if !(focal.is_finite() && focal > 0.0) {
            return Err(invalid(format!("focal length {focal} must be positive")));
        }
        let directions = (0..height)
            .flat_map(|y| (0..width).map(move |x| (x, y)))
            .map(|(x, y)| {
                let px = (x as f64 + 0.5 - principal[0]) / focal;
                let py = (y as f64 + 0.5 - principal[1]) / focal;
                Vec3::new(-px, py, 1.0).normalized().to_array()
            })
            .collect();
        Self::new(width, height, directions)
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn direction(&self, i: usize) -> Vec3 {
        Vec3::from_array(self.directions[i])
    }
}

/// Loss gradients with the layout of a [`GBuffer`].
#[derive(Debug, Clone, PartialEq)]
pub struct GBufferGradients {
    pub width: usize,
    pub height: usize,
    pub basecolor: Vec<[f64; 3]>,
    pub normal: Vec<[f64; 3]>,
    pub roughness: Vec<f64>,
    pub metallic: Vec<f64>,
}

impl GBufferGradients {
    pub fn zeros(width: usize, height: usize) -> Self {
        let n = width * height;
        Self {
            width,
            height,
            basecolor: vec![[0.0; 3]; n],
            normal: vec![[0.0; 3]; n],
            roughness: vec![0.0; n],
            metallic: vec![0.0; n],
        }
    }

    fn from_pixels(width: usize, height: usize, px: Vec<PixelGradient>) -> Self {
        let mut g = Self::zeros(width, height);
        for (i, p) in px.into_iter().enumerate() {
            g.basecolor[i] = p.basecolor.to_array();
            g.normal[i] = p.normal.to_array();
            g.roughness[i] = p.roughness;
            g.metallic[i] = p.metallic;
        }
        g
    }

    pub fn is_finite(&self) -> bool {
        self.basecolor.iter().flatten().all(|v| v.is_finite())
            && self.normal.iter().flatten().all(|v| v.is_finite())
            && self.roughness.iter().all(|v| v.is_finite())
            && self.metallic.iter().all(|v| v.is_finite())
    }

    /// Euclidean norm over every field.
    pub fn norm(&self) -> f64 {
        let sq = |v: &f64| v * v;
        (self.basecolor.iter().flatten().map(sq).sum::<f64>()
            + self.normal.iter().flatten().map(sq).sum::<f64>()
            + self.roughness.iter().map(sq).sum::<f64>()
            + self.metallic.iter().map(sq).sum::<f64>())
        .sqrt()
    }
}

/// Schlick Fresnel `F0 + (1 − F0)(1 − n·v)^5`.
pub fn fresnel_schlick(ndotv: f64, f0: [f64; 3]) -> Result<[f64; 3]> {
    if !(0.0..=1.0).contains(&ndotv) {
        return Err(invalid(format!("n·v = {ndotv} outside [0, 1]")));
    }
    if f0.iter().any(|c| !(0.0..=1.0).contains(c)) {
        return Err(invalid(format!("F0 {f0:?} outside [0, 1]")));
    }
    Ok(shading::schlick(ndotv, Vec3::from_array(f0)).to_array())
}

/// Mirror reflection `2(n·v)n − v` of the view direction about the normal.
pub fn reflect(n: [f64; 3], v: [f64; 3]) -> Result<[f64; 3]> {
    let (n, v) = (Vec3::from_array(n), Vec3::from_array(v));
    for d in [n, v] {
        if (d.length() - 1.0).abs() > 1e-6 {
            return Err(invalid(format!("{d:?} is not unit length")));
        }
    }
    let ndv = n.dot(v);
    if ndv <= 0.0 {
        return Err(invalid(format!("back-facing configuration, n·v = {ndv}")));
    }
    Ok((n * (2.0 * ndv) - v).to_array())
}

/// Forward render with the diffuse/specular split exposed.
#[derive(Debug, Clone)]
pub struct RenderSplit {
    pub diffuse: Vec<[f64; 3]>,
    pub specular: Vec<[f64; 3]>,
    pub radiance: LinearImage,
    /// `true` where the pixel faced away from the camera and was blacked out.
    pub back_facing: Mask,
}

fn check_shapes(g: &GBuffer, view: &ViewSetup) -> Result<()> {
    g.validate()?;
    if g.dims() != view.dims() {
        return Err(Error::ShapeMismatch {
            expected: g.dims(),
            actual: view.dims(),
        });
    }
    Ok(())
}

pub fn render_split(g: &GBuffer, assets: &EnvAssets, view: &ViewSetup) -> Result<RenderSplit> {
    check_shapes(g, view)?;
    let px: Vec<PixelShading> = (0..g.len())
        .into_par_iter()
        .map(|i| shade_pixel(&g.pixel(i, view.direction(i)), assets))
        .collect();
    Ok(RenderSplit {
        diffuse: px.iter().map(|p| p.diffuse.to_array()).collect(),
        specular: px.iter().map(|p| p.specular.to_array()).collect(),
        radiance: LinearImage::new(
            g.width,
            g.height,
            px.iter().map(|p| p.radiance.to_array()).collect(),
        )?,
        back_facing: Mask::new(g.width, g.height, px.iter().map(|p| p.back_facing).collect())?,
    })
}

/// `L_o = max(L_diff + L_spec, 0)` for every pixel.
pub fn render_forward(g: &GBuffer, assets: &EnvAssets, view: &ViewSetup) -> Result<LinearImage> {
    Ok(render_split(g, assets, view)?.radiance)
}

/// Reverse-mode derivatives of `Σ loss_grad · L_o` with respect to every
/// G-buffer field. Normal gradients are with respect to the stored
/// (pre-normalization) vector.
pub fn render_backward(
    g: &GBuffer,
    assets: &EnvAssets,
    view: &ViewSetup,
    loss_grad: &[[f64; 3]],
) -> Result<GBufferGradients> {
    check_shapes(g, view)?;
    if loss_grad.len() != g.len() {
        return Err(invalid("adjoint size does not match the G-buffer"));
    }
    if loss_grad.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("loss gradient".into()));
    }
    let px: Vec<PixelGradient> = (0..g.len())
        .into_par_iter()
        .map(|i| {
            shade_pixel_vjp(
                &g.pixel(i, view.direction(i)),
                assets,
                Vec3::from_array(loss_grad[i]),
            )
        })
        .collect();
    Ok(GBufferGradients::from_pixels(g.width, g.height, px))
}
