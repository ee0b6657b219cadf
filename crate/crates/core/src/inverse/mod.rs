//! Inverse rendering: the measurement loss, a projected gradient-descent
//! G-buffer optimizer and a DDIM sampler steered by loss gradients.

mod ddim;
mod decoder;
mod descent;
mod dps;

pub use ddim::{ddim_sample, ddim_step, initial_noise, DiffusionSchedule, Denoiser, GaussianPriorDenoiser};
pub use decoder::{AffineAlbedoDecoder, Decoder, Latent, ReferenceDecoder};
pub use descent::{optimize_gbuffer, DescentResult, MAX_HALVINGS};
pub use dps::{dps_sample, write_diagnostics_csv, DpsOutput, GuidanceConfig, StepDiagnostics};

use rayon::prelude::*;

use crate::envmap::EnvAssets;
use crate::error::{Error, Result};
use crate::imaging::{validity, LinearImage, Mask};
use crate::renderer::{render_backward, render_forward, GBuffer, GBufferGradients, ViewSetup};

#[derive(Debug, Clone)]
pub struct MeasurementLoss {
    /// Mean squared residual over valid pixels and channels.
    pub loss: f64,
    pub gradients: GBufferGradients,
    pub rendered: LinearImage,
    pub valid_count: usize,
}

/// `mean ‖R(g, L) − observed‖²` over valid pixels, with its G-buffer gradient.
pub fn measurement_loss(
    g: &GBuffer,
    assets: &EnvAssets,
    view: &ViewSetup,
    observed: &LinearImage,
    mask: Option<&Mask>,
) -> Result<MeasurementLoss> {
    observed.check_same_dims(g.dims())?;
    let valid = validity(mask, g.dims())?;
    let valid_count = valid.iter().filter(|v| **v).count();
    if valid_count == 0 {
        return Err(Error::EmptySelection);
    }
    let rendered = render_forward(g, assets, view)?;
    let denom = 3.0 * valid_count as f64;
    let residuals: Vec<[f64; 3]> = rendered
        .pixels()
        .par_iter()
        .zip(observed.pixels())
        .zip(&valid)
        .map(|((r, o), ok)| {
            if *ok {
                [r[0] - o[0], r[1] - o[1], r[2] - o[2]]
            } else {
                [0.0; 3]
            }
        })
        .collect();
    let loss = residuals.iter().flatten().map(|d| d * d).sum::<f64>() / denom;
    if !loss.is_finite() {
        return Err(Error::NonFinite("measurement loss".into()));
    }
    let adjoint: Vec<[f64; 3]> = residuals
        .iter()
        .map(|d| d.map(|v| 2.0 * v / denom))
        .collect();
    let gradients = render_backward(g, assets, view, &adjoint)?;
    Ok(MeasurementLoss {
        loss,
        gradients,
        rendered,
        valid_count,
    })
}
