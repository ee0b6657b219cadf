//! Relighting evaluation: global scale alignment, masked PSNR/SSIM on
//! tone-mapped values and leave-one-lighting-out folds.

mod report;

pub use report::{aggregate, write_reports_csv, write_reports_json, MetricsReport};

use std::collections::HashSet;

use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::imaging::{tone_map_for_metrics, validity, LinearImage, Mask};

/// PSNR reported for zero error.
pub const PSNR_CAP: f64 = 100.0;
pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
const SSIM_K1: f64 = 0.01;
const SSIM_K2: f64 = 0.03;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaleAlignment {
    pub alpha: f64,
    /// Prediction is zero on every valid pixel; `alpha` is then 1.
    pub degenerate: bool,
}

/// Least-squares global scale `argmin_α ‖α·pred − gt‖²`, one scalar shared
/// by all channels.
pub fn align_scale(pred: &LinearImage, gt: &LinearImage, mask: Option<&Mask>) -> Result<ScaleAlignment> {
    pred.check_same_dims(gt.dims())?;
    let valid = validity(mask, pred.dims())?;
    if !valid.iter().any(|v| *v) {
        return Err(Error::EmptySelection);
    }
    let (mut pg, mut pp) = (0.0, 0.0);
    for ((p, g), ok) in pred.pixels().iter().zip(gt.pixels()).zip(&valid) {
        if *ok {
            for c in 0..3 {
                pg += p[c] * g[c];
                pp += p[c] * p[c];
            }
        }
    }
    if pp == 0.0 {
        return Ok(ScaleAlignment {
            alpha: 1.0,
            degenerate: true,
        });
    }
    Ok(ScaleAlignment {
        alpha: pg / pp,
        degenerate: false,
    })
}

/// `10·log10(1/MSE)` over valid pixels and channels, data range 1, capped at
/// [`PSNR_CAP`].
pub fn psnr(pred: &LinearImage, gt: &LinearImage, mask: Option<&Mask>) -> Result<f64> {
    pred.check_same_dims(gt.dims())?;
    let valid = validity(mask, pred.dims())?;
    let mut sum = 0.0;
    let mut count = 0usize;
    for ((p, g), ok) in pred.pixels().iter().zip(gt.pixels()).zip(&valid) {
        if *ok {
            for c in 0..3 {
                sum += (p[c] - g[c]) * (p[c] - g[c]);
            }
            count += 3;
        }
    }
    if count == 0 {
        return Err(Error::EmptySelection);
    }
    let mse = sum / count as f64;
    if mse == 0.0 {
        return Ok(PSNR_CAP);
    }
    Ok((10.0 * (1.0 / mse).log10()).min(PSNR_CAP))
}

fn gaussian_window() -> [f64; SSIM_WINDOW] {
    let half = (SSIM_WINDOW / 2) as f64;
    let mut w = [0.0; SSIM_WINDOW];
    for (i, v) in w.iter_mut().enumerate() {
        let d = i as f64 - half;
        *v = (-d * d / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp();
    }
    let s: f64 = w.iter().sum();
    w.map(|v| v / s)
}

/// Mean SSIM of the RGB-mean luminance over pixels whose full 11×11 window
/// lies inside the image and inside the valid set.
pub fn ssim(pred: &LinearImage, gt: &LinearImage, mask: Option<&Mask>) -> Result<f64> {
    pred.check_same_dims(gt.dims())?;
    let (w, h) = pred.dims();
    if w < SSIM_WINDOW || h < SSIM_WINDOW {
        return Err(invalid(format!(
            "SSIM needs at least {SSIM_WINDOW}x{SSIM_WINDOW} pixels, got {w}x{h}"
        )));
    }
    let valid = validity(mask, pred.dims())?;
    let gray = |img: &LinearImage| -> Vec<f64> {
        img.pixels().iter().map(|p| (p[0] + p[1] + p[2]) / 3.0).collect()
    };
    let (x, y) = (gray(pred), gray(gt));
    let kernel = gaussian_window();
    let c1 = SSIM_K1 * SSIM_K1;
    let c2 = SSIM_K2 * SSIM_K2;
    let r = SSIM_WINDOW / 2;

    // Count of invalid pixels in each window via a summed-area table.
    let mut sat = vec![0usize; (w + 1) * (h + 1)];
    for j in 0..h {
        for i in 0..w {
            sat[(j + 1) * (w + 1) + i + 1] = usize::from(!valid[j * w + i])
                + sat[j * (w + 1) + i + 1]
                + sat[(j + 1) * (w + 1) + i]
                - sat[j * (w + 1) + i];
        }
    }
    let invalid_in = |x0: usize, y0: usize| {
        let (x1, y1) = (x0 + SSIM_WINDOW, y0 + SSIM_WINDOW);
        sat[y1 * (w + 1) + x1] + sat[y0 * (w + 1) + x0] - sat[y0 * (w + 1) + x1] - sat[y1 * (w + 1) + x0]
    };

    let mut total = 0.0;
    let mut count = 0usize;
    for cy in r..h - r {
        for cx in r..w - r {
            if invalid_in(cx - r, cy - r) > 0 {
                continue;
            }
            let (mut mx, mut my, mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
            for (dy, ky) in kernel.iter().enumerate() {
                let row = (cy - r + dy) * w + cx - r;
                for (dx, kx) in kernel.iter().enumerate() {
                    let k = ky * kx;
                    let (a, b) = (x[row + dx], y[row + dx]);
                    mx += k * a;
                    my += k * b;
                    sxx += k * a * a;
                    syy += k * b * b;
                    sxy += k * a * b;
                }
            }
            let vx = sxx - mx * mx;
            let vy = syy - my * my;
            let cov = sxy - mx * my;
            total += ((2.0 * mx * my + c1) * (2.0 * cov + c2))
                / ((mx * mx + my * my + c1) * (vx + vy + c2));
            count += 1;
        }
    }
    if count == 0 {
        return Err(Error::EmptySelection);
    }
    Ok((total / count as f64).clamp(-1.0, 1.0))
}

/// Align on linear values, tone-map both images, then score.
pub fn evaluate_relight(
    pred_linear: &LinearImage,
    gt_linear: &LinearImage,
    mask: Option<&Mask>,
) -> Result<MetricsReport> {
    let align = align_scale(pred_linear, gt_linear, mask)?;
    let aligned = pred_linear.scaled(align.alpha.max(0.0))?;
    let (p, g) = (tone_map_for_metrics(&aligned), tone_map_for_metrics(gt_linear));
    let valid = validity(mask, pred_linear.dims())?;
    Ok(MetricsReport {
        scene: String::new(),
        lighting: String::new(),
        alpha: align.alpha,
        degenerate: align.degenerate,
        psnr: psnr(&p, &g, mask)?,
        ssim: ssim(&p, &g, mask)?,
        valid_pixels: valid.iter().filter(|v| **v).count(),
        lpips: None,
        lpips_reason: report::LPIPS_REASON.to_string(),
        ssim_mode: report::SSIM_MODE.to_string(),
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SceneFold {
    pub held_out: String,
    pub support: Vec<String>,
}

/// One fold per lighting, in input order.
pub fn leave_one_out_folds(lighting_ids: &[String]) -> Result<Vec<SceneFold>> {
    if lighting_ids.len() < 2 {
        return Err(invalid(format!(
            "leave-one-out needs at least 2 lightings, got {}",
            lighting_ids.len()
        )));
    }
    let mut seen = HashSet::new();
    if let Some(dup) = lighting_ids.iter().find(|id| !seen.insert(id.as_str())) {
        return Err(invalid(format!("duplicate lighting id `{dup}`")));
    }
    Ok(lighting_ids
        .iter()
        .enumerate()
        .map(|(i, held)| SceneFold {
            held_out: held.clone(),
            support: lighting_ids
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != i)
                .map(|(_, id)| id.clone())
                .collect(),
        })
        .collect())
}
