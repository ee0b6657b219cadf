//! Bracketed-exposure merge into a single linear HDR radiance image.

use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::imaging::{LinearImage, Mask};

/// Triangular hat weight `1 - |2z - 1|`, peaking at mid-gray.
pub fn triangle_weight(z: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&z) {
        return Err(invalid(format!("normalized value {z} outside [0, 1]")));
    }
    Ok(1.0 - (2.0 * z - 1.0).abs())
}

/// One bracket: normalized linear values plus its exposure time in seconds.
#[derive(Debug, Clone)]
pub struct ExposureFrame {
    pixels: LinearImage,
    exposure_time: f64,
}

impl ExposureFrame {
    pub fn new(pixels: LinearImage, exposure_time: f64) -> Result<Self> {
        if !(exposure_time.is_finite() && exposure_time > 0.0) {
            return Err(invalid(format!("exposure time {exposure_time} must be finite and > 0")));
        }
        if let Some(v) = pixels.pixels().iter().flatten().find(|v| **v > 1.0) {
            return Err(invalid(format!("normalized pixel value {v} exceeds 1")));
        }
        Ok(Self {
            pixels,
            exposure_time,
        })
    }

    pub fn pixels(&self) -> &LinearImage {
        &self.pixels
    }

    pub fn exposure_time(&self) -> f64 {
        self.exposure_time
    }
}

#[derive(Debug, Clone)]
pub struct ExposureStack {
    frames: Vec<ExposureFrame>,
}

impl ExposureStack {
    pub fn new(frames: Vec<ExposureFrame>) -> Result<Self> {
        let first = frames
            .first()
            .ok_or_else(|| invalid("exposure stack is empty"))?
            .pixels
            .dims();
        for f in &frames[1..] {
            if f.pixels.dims() != first {
                return Err(Error::ShapeMismatch {
                    expected: first,
                    actual: f.pixels.dims(),
                });
            }
        }
        Ok(Self { frames })
    }

    pub fn frames(&self) -> &[ExposureFrame] {
        &self.frames
    }
}

#[derive(Debug, Clone)]
pub struct MergeResult {
    pub radiance: LinearImage,
    /// `true` where at least one channel had no usable bracket and fell back
    /// to the shortest exposure.
    pub saturated: Mask,
}

/// Merges a stack with per-channel triangular weights.
///
/// Samples are reduced in `(exposure time, value)` order so the result does
/// not depend on how the frames were listed.
pub fn merge_exposures(stack: &ExposureStack) -> Result<MergeResult> {
    let (w, h) = stack.frames[0].pixels.dims();
    let times: Vec<f64> = stack.frames.iter().map(|f| f.exposure_time).collect();

    let merged: Vec<([f64; 3], bool)> = (0..w * h)
        .into_par_iter()
        .map(|i| {
            let mut out = [0.0; 3];
            let mut fallback = false;
            let mut samples: Vec<(f64, f64)> = Vec::with_capacity(times.len());
            for (c, slot) in out.iter_mut().enumerate() {
                samples.clear();
                samples.extend(
                    stack
                        .frames
                        .iter()
                        .zip(&times)
                        .map(|(f, t)| (*t, f.pixels.pixels()[i][c])),
                );
                samples.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
                let (mut num, mut den) = (0.0, 0.0);
                for &(t, z) in &samples {
                    let wz = 1.0 - (2.0 * z - 1.0).abs();
                    num += wz * (z / t);
                    den += wz;
                }
                *slot = if den > 0.0 {
                    num / den
                } else {
                    fallback = true;
                    let (t, z) = samples[0];
                    z / t
                };
            }
            (out, fallback)
        })
        .collect();

    let (data, flags): (Vec<_>, Vec<_>) = merged.into_iter().unzip();
    Ok(MergeResult {
        radiance: LinearImage::new(w, h, data)?,
        saturated: Mask::new(w, h, flags)?,
    })
}
