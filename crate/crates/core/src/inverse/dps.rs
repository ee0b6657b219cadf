use std::io::Write;
use std::path::Path;

use super::ddim::{ddim_step, initial_noise, DiffusionSchedule, Denoiser};
use super::decoder::{Decoder, Latent};
use super::measurement_loss;
use crate::envmap::EnvAssets;
use crate::error::{invalid, Error, Result};
use crate::imaging::{LinearImage, Mask};
use crate::renderer::{GBuffer, ViewSetup};

/// Residual-normalized guidance: `ζ_t = zeta / (√L + 1e-8)`, with the latent
/// gradient clipped to norm `clip` before it is applied.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GuidanceConfig {
    pub zeta: f64,
    pub clip: f64,
    pub seed: u64,
}

impl GuidanceConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.zeta.is_finite() && self.zeta >= 0.0) {
            return Err(invalid(format!("zeta {} must be finite and >= 0", self.zeta)));
        }
        if !(self.clip.is_finite() && self.clip > 0.0) {
            return Err(invalid(format!("clip {} must be finite and > 0", self.clip)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepDiagnostics {
    pub step: usize,
    pub t: usize,
    /// Loss of the decoded `x̂_0` before the correction.
    pub loss: f64,
    /// Latent gradient norm before clipping.
    pub grad_norm: f64,
    /// Applied `ζ_t`.
    pub zeta: f64,
    /// Loss of the clean estimate implied by the corrected latent.
    pub loss_after: f64,
}

#[derive(Debug, Clone)]
pub struct DpsOutput {
    pub gbuffer: GBuffer,
    /// Final clean latent.
    pub x0: Vec<f64>,
    pub diagnostics: Vec<StepDiagnostics>,
    pub final_loss: f64,
}

/// Guided DDIM. At each step the measurement loss of `D(x̂_0)` is
/// differentiated with the denoiser held constant (`∂x̂_0/∂x_t = 1/√ᾱ_t`),
/// and `ζ_t · g_t` is subtracted from `x_{t_to}`. The result decodes the
/// latent reached at `t = 0`.
#[allow(clippy::too_many_arguments)]
pub fn dps_sample(
    denoiser: &dyn Denoiser,
    decoder: &dyn Decoder,
    assets: &EnvAssets,
    view: &ViewSetup,
    observed: &LinearImage,
    mask: Option<&Mask>,
    cfg: &GuidanceConfig,
    schedule: &DiffusionSchedule,
) -> Result<DpsOutput> {
    cfg.validate()?;
    let (width, height) = observed.dims();
    if view.dims() != (width, height) {
        return Err(Error::ShapeMismatch {
            expected: (width, height),
            actual: view.dims(),
        });
    }
    let channels = decoder.channels();
    let latent = |data: Vec<f64>| Latent {
        width,
        height,
        channels,
        data,
    };
    let mut x = initial_noise(width * height * channels, cfg.seed);
    let mut diagnostics = Vec::with_capacity(schedule.inference_steps());

    for (step, pair) in schedule.timesteps().windows(2).enumerate() {
        let (t_from, t_to) = (pair[0], pair[1]);
        let eps = denoiser.predict_noise(&x, t_from, schedule);
        let (x0, mut next) = ddim_step(&x, &eps, t_from, t_to, schedule)?;
        let z0 = latent(x0);
        let decoded = decoder.decode(&z0)?;
        let ml = measurement_loss(&decoded, assets, view, observed, mask)?;
        let inv_scale = 1.0 / schedule.alpha_bar(t_from).sqrt();
        let mut grad = decoder.vjp(&z0, &ml.gradients).data;
        grad.iter_mut().for_each(|v| *v *= inv_scale);
        let grad_norm = grad.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !grad_norm.is_finite() {
            return Err(Error::NonFinite(format!("guidance gradient at step {step} (t = {t_from})")));
        }
        if grad_norm > cfg.clip {
            let k = cfg.clip / grad_norm;
            grad.iter_mut().for_each(|v| *v *= k);
        }
        let zeta = cfg.zeta / (ml.loss.sqrt() + 1e-8);
        for (n, g) in next.iter_mut().zip(&grad) {
            *n -= zeta * g;
        }
        let loss_after = if cfg.zeta == 0.0 {
            ml.loss
        } else {
            let back = 1.0 / schedule.alpha_bar(t_to).sqrt();
            let shifted: Vec<f64> = z0.data.iter().zip(&grad).map(|(x, g)| x - zeta * g * back).collect();
            let g2 = decoder.decode(&latent(shifted))?;
            measurement_loss(&g2, assets, view, observed, mask)?.loss
        };
        diagnostics.push(StepDiagnostics {
            step,
            t: t_from,
            loss: ml.loss,
            grad_norm,
            zeta,
            loss_after,
        });
        x = next;
    }
    let z = latent(x);
    let gbuffer = decoder.decode(&z)?;
    let final_loss = measurement_loss(&gbuffer, assets, view, observed, mask)?.loss;
    Ok(DpsOutput {
        gbuffer,
        x0: z.data,
        diagnostics,
        final_loss,
    })
}

pub fn write_diagnostics_csv(path: impl AsRef<Path>, diagnostics: &[StepDiagnostics]) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path.as_ref())?);
    writeln!(out, "step,t,l_render,grad_norm,zeta,l_render_after")?;
    for d in diagnostics {
        writeln!(
            out,
            "{},{},{:e},{:e},{:e},{:e}",
            d.step, d.t, d.loss, d.grad_norm, d.zeta, d.loss_after
        )?;
    }
    out.flush()?;
    Ok(())
}
