//! Linear-radiance rasters, validity masks and the display transform applied
//! before pixel metrics.

mod io;

pub use io::{
    read_exr, read_exr_scalar, read_mask_png, write_exr, write_exr_scalar, write_mask_png,
};

use crate::error::{Error, Result};

/// RGB linear radiance raster, row-major, double precision.
///
/// Every value is finite and non-negative; dimensions are at least 1×1.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearImage {
    width: usize,
    height: usize,
    data: Vec<[f64; 3]>,
}

impl LinearImage {
    pub fn new(width: usize, height: usize, data: Vec<[f64; 3]>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidImage(format!(
                "dimensions must be at least 1x1, got {width}x{height}"
            )));
        }
        if data.len() != width * height {
            return Err(Error::InvalidImage(format!(
                "expected {} pixels for {width}x{height}, got {}",
                width * height,
                data.len()
            )));
        }
        if let Some((i, px)) = data
            .iter()
            .enumerate()
            .find(|(_, px)| px.iter().any(|v| !v.is_finite() || *v < 0.0))
        {
            return Err(Error::InvalidImage(format!(
                "pixel {i} = {px:?} is negative or non-finite"
            )));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, value: [f64; 3]) -> Result<Self> {
        Self::new(width, height, vec![value; width * height])
    }

    pub fn from_fn(
        width: usize,
        height: usize,
        f: impl FnMut(usize, usize) -> [f64; 3],
    ) -> Result<Self> {
        let mut f = f;
        let data = (0..height)
            .flat_map(|y| (0..width).map(move |x| (x, y)))
            .map(|(x, y)| f(x, y))
            .collect();
        Self::new(width, height, data)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn pixels(&self) -> &[[f64; 3]] {
        &self.data
    }

    pub fn into_pixels(self) -> Vec<[f64; 3]> {
        self.data
    }

    pub fn get(&self, x: usize, y: usize) -> [f64; 3] {
        self.data[y * self.width + x]
    }

    /// Multiplies every sample by `k` (`k` must be finite and non-negative).
    pub fn scaled(&self, k: f64) -> Result<Self> {
        Self::new(
            self.width,
            self.height,
            self.data
                .iter()
                .map(|p| [p[0] * k, p[1] * k, p[2] * k])
                .collect(),
        )
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(
            self.width,
            self.height,
            self.data.iter().map(|p| [f(p[0]), f(p[1]), f(p[2])]).collect(),
        )
    }

    pub(crate) fn check_same_dims(&self, other: (usize, usize)) -> Result<()> {
        if self.dims() != other {
            return Err(Error::ShapeMismatch {
                expected: self.dims(),
                actual: other,
            });
        }
        Ok(())
    }
}

/// Per-pixel boolean raster. For validity masks `true` marks a static pixel
/// that participates in losses and metrics.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask {
    width: usize,
    height: usize,
    data: Vec<bool>,
}

impl Mask {
    pub fn new(width: usize, height: usize, data: Vec<bool>) -> Result<Self> {
        if width == 0 || height == 0 || data.len() != width * height {
            return Err(Error::InvalidImage(format!(
                "mask of {width}x{height} cannot hold {} values",
                data.len()
            )));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn all(width: usize, height: usize, value: bool) -> Result<Self> {
        Self::new(width, height, vec![value; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn values(&self) -> &[bool] {
        &self.data
    }

    pub fn get(&self, x: usize, y: usize) -> bool {
        self.data[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, value: bool) {
        self.data[y * self.width + x] = value;
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|v| **v).count()
    }
}

/// Resolves an optional mask into per-pixel validity flags of `dims`.
pub(crate) fn validity(mask: Option<&Mask>, dims: (usize, usize)) -> Result<Vec<bool>> {
    match mask {
        Some(m) if m.dims() != dims => Err(Error::ShapeMismatch {
            expected: dims,
            actual: m.dims(),
        }),
        Some(m) => Ok(m.values().to_vec()),
        None => Ok(vec![true; dims.0 * dims.1]),
    }
}

const DISPLAY_GAMMA: f64 = 2.2;

/// Global Reinhard `x/(1+x)` followed by display gamma, per channel.
pub fn tone_map_value(x: f64) -> f64 {
    // x/(1+x) rounds to 1.0 past 2^53; keep the result strictly below 1.
    (x / (1.0 + x)).powf(1.0 / DISPLAY_GAMMA).min(1.0 - f64::EPSILON / 2.0)
}

/// Maps linear HDR radiance into `[0, 1)` for PSNR/SSIM.
pub fn tone_map_for_metrics(hdr: &LinearImage) -> LinearImage {
    let data = hdr
        .pixels()
        .iter()
        .map(|p| [tone_map_value(p[0]), tone_map_value(p[1]), tone_map_value(p[2])])
        .collect();
    // Output of a monotone map from [0, inf) into [0, 1) keeps the invariants.
    LinearImage {
        width: hdr.width(),
        height: hdr.height(),
        data,
    }
}
